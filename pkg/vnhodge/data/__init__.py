from .sample_data import (
    circle_subdivision,
    circle_trivial,
    cyclic_circle,
    morse_circle,
    sample_path,
    sampled_circle,
    torus,
    two_patch_cocycle,
    wedge,
)
