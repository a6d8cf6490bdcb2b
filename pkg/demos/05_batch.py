# coding: utf-8

# # Batch runs from the command line
#
# The ``densify`` command works on a KITTI-style directory.  The bundled scenes
# can be rendered into one, which makes a handy dry run.

# In[1]:

import tempfile
from pathlib import Path

from densify.cli import main

work = Path(tempfile.mkdtemp())
main(["render", str(work / "frames")])
print(sorted(p.name for p in (work / "frames").iterdir()))


# Complete every frame and score it.  ``report.txt`` is key=value per line.

# In[2]:

main(["complete", str(work / "frames"), str(work / "out"), "--emit-error-maps"])
print((work / "out" / "report.txt").read_text().splitlines()[:4])
print((work / "out" / "timing.txt").read_text().splitlines()[-1])


# An ablation: each line of the sweep is a label and the settings that differ from the base.

# In[3]:

sweep = work / "sweep.txt"
sweep.write_text("gray: colorspace = gray; slic_iterations = 20\n"
                 "no hull: use_convex_hull = false\n")
main(["ablate", str(work / "frames"), str(sweep)])
