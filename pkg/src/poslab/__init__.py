"""poslab: a desk-scale lab for goal-conditioned world-model agents.

Subpackages:
  envsim     2D object-positioning environments with segmentation renders
  diffcore   numpy autodiff substrate (tensors, layers, Adam, checkpoints)
  worldmodel recurrent latent dynamics with flat and object-centric decoders
  behavior   imagination-trained actor-critic with pluggable goal conditioning
  harness    datasets, offline training, grid evaluation, ablations, CLI
"""

__version__ = "0.1.0"
