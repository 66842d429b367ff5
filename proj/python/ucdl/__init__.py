"""Unrolled convolutional dictionary learning for dynamic MRI reconstruction.

Arrays are numpy complex128 in row-major (N_x, N_y[, N_t]) order; filters are
real arrays of shape (K, kernel dims...).
"""

from ._core import (
    NetworkConfig,
    NetworkParams,
    Sample,
    UcdlError,
    dictionary_synthesis,
    evaluate,
    fft,
    ifft,
    init_network,
    load_checkpoint,
    load_sample,
    make_phantom,
    read_tensor,
    reconstruct,
    save_checkpoint,
    save_sample,
    soft_threshold,
    sparse_code,
    synth_dataset,
    train,
    write_tensor,
)

__all__ = [
    "NetworkConfig",
    "NetworkParams",
    "Sample",
    "UcdlError",
    "dictionary_synthesis",
    "evaluate",
    "fft",
    "ifft",
    "init_network",
    "load_checkpoint",
    "load_sample",
    "make_phantom",
    "read_tensor",
    "reconstruct",
    "save_checkpoint",
    "save_sample",
    "soft_threshold",
    "sparse_code",
    "synth_dataset",
    "train",
    "write_tensor",
]
