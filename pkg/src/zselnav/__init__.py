"""Modular transfer learning for semantic visual navigation, desk scale.

Train an image-goal search policy in a procedurally generated 2.5D grid
world, align other goal modalities into its goal-embedding space offline,
then reassemble the modules for downstream navigation tasks with zero or
few target interactions.
"""

__version__ = "0.1.0"
