"""teleopkit: human-motion streams to whole-body robot commands and datasets.

Subpackages:
  core      geometric primitives, sample types, robot DoF model
  retarget  tracker-to-torso/base retargeting pipeline
  action    forward-looking delta-joint actions and observations
  sim       synthetic operator trajectories and closed-loop tracking trials
  annotate  breakpoint proposal, transcript alignment, review edits
  dataio    episode persistence, resampling, throughput metrics
  service   review HTTP service (FastAPI)
  cli       command-line entry points
"""

__version__ = "0.1.0"
