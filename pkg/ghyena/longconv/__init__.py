from ghyena.longconv.fft import ComplexSpectrum, dft_naive, fft, ifft, irfft, rfft
from ghyena.longconv.ops import (
    LEVI_CIVITA,
    GeometricConvParams,
    LeviCivitaPlan,
    bilinear_conv,
    circular_conv,
    geometric_long_conv,
    scalar_long_conv,
    scalarize,
    vector_long_conv,
)
from ghyena.longconv.oracles import (
    circular_conv_naive,
    geometric_long_conv_naive,
    scalar_long_conv_naive,
    vector_long_conv_naive,
)

__all__ = [
    "LEVI_CIVITA",
    "ComplexSpectrum",
    "GeometricConvParams",
    "LeviCivitaPlan",
    "bilinear_conv",
    "circular_conv",
    "circular_conv_naive",
    "dft_naive",
    "fft",
    "geometric_long_conv",
    "geometric_long_conv_naive",
    "ifft",
    "irfft",
    "rfft",
    "scalar_long_conv",
    "scalar_long_conv_naive",
    "scalarize",
    "vector_long_conv",
    "vector_long_conv_naive",
]
