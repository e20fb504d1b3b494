"""Image restoration by quasi-Newton steps on the forward-backward envelope.

Thin wrapper around the compiled module; see `help(pnpqn.run)` for the main
entry point. Runs are described by the same key=value config text the CLI
consumes.
"""

from ._pnpqn import (
    DimensionError,
    Error,
    IoError,
    ParameterError,
    add_gaussian_noise,
    builtin_kernels,
    convolve,
    kernel,
    mse,
    psnr,
    run,
    run_to_dir,
    synthetic_image,
    verify,
)

__all__ = [
    "DimensionError",
    "Error",
    "IoError",
    "ParameterError",
    "add_gaussian_noise",
    "builtin_kernels",
    "convolve",
    "kernel",
    "mse",
    "psnr",
    "run",
    "run_to_dir",
    "synthetic_image",
    "verify",
]
