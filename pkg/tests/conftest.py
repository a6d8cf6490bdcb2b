import numpy as np
import pytest

from densify.core import CameraModel

KITTI_F = 721.5377
KITTI_C = (609.5593, 172.854)


@pytest.fixture
def kitti_cam():
    return CameraModel.from_intrinsics(KITTI_F, KITTI_F, *KITTI_C)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gauss_solve(A, b):
    """Naive Gaussian elimination with partial pivoting, pure Python floats."""
    n = len(A)
    m = [list(map(float, row)) + [float(bi)] for row, bi in zip(A, b)]
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(m[r][c]))
        m[c], m[p] = m[p], m[c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            for k in range(c, n + 1):
                m[r][k] -= f * m[c][k]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (m[r][n] - sum(m[r][k] * x[k] for k in range(r + 1, n))) / m[r][r]
    return x


def small_scene(seed=0, width=240, height=96, **kw):
    """Three distinctly coloured planar patches on a back wall, KITTI-like optics."""
    from densify.synth import Patch, SyntheticScene
    rng = np.random.default_rng(seed)
    cam = CameraModel.from_intrinsics(260.0, 260.0, width / 2 - 0.5, height / 2 - 0.5)
    z_back = float(rng.uniform(25, 40))
    u0 = int(rng.integers(20, 60))
    patches = (
        Patch((0.0, 0.0, -1.0, z_back), (40, 60, 200)),
        Patch((float(rng.uniform(-0.3, 0.3)), 0.0, -1.0, float(rng.uniform(6, 10))), (220, 40, 30),
              ((u0, 10), (u0 + 70, 10), (u0 + 70, 80), (u0, 80))),
        Patch((0.0, 1.0, 0.0, -1.6), (90, 200, 90), ((0, 70), (width, 70), (width, height), (0, height))),
    )
    return SyntheticScene(width, height, cam, patches, name=f"small{seed:02d}", seed=seed, **kw)


# acceptance results, printed at the end of the session
ACCEPTANCE: dict = {}


def record(criterion: str, passed: bool | None, detail: str) -> None:
    """passed=None marks a criterion that could not be run here."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda k: int(k.split(".")[0])):
        passed, detail = ACCEPTANCE[name]
        tag = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{tag}  {name}: {detail}")
