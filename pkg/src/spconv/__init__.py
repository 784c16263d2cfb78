"""Padded, strided 2-D convolution as a one-time sparse transform applied by SpMV."""
from .analysis import NnzReport, c1, c2, dense_count, nnz_bound, nnz_oracle, nnz_per_cell, nnz_report
from .reference import direct_conv, im2col, im2col_conv
from .sparse import (CSC, CSR, SparseError, SparseMatrix, Triplets, compile, hstack_blocks, prune,
                     spgemm, spmv, vstack_blocks)
from .transform import (ConvError, ConvSpec, Kernel, Transform, build_conv_matrix, build_padding_matrix,
                        build_transform, convolve, flip_kernel, unvectorize, vectorize)

__version__ = "0.1.0"
