"""camflow: point-cloud-guided, camera-controllable video generation toy.

A self-contained rectified-flow video transformer trained on procedurally
generated RGB-D scenes: the input frame is lifted to a point cloud, rendered
along the camera trajectory as guidance frames, injected along the frame
axis, aligned through anchor-frame attention, and supervised with
endpoint-weighted per-frame losses.
"""

__version__ = "0.1.0"
