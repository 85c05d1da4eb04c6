"""Built-in photometric / colorimetric tables.

V(λ) is the CIE 1924 photopic luminosity function (5 nm tabulation,
densified to 1 nm by linear interpolation at import). The color matching
functions and D65 power distribution are the standard CIE 1931 2° / D65
tables at 10 nm, which is all the default 10 nm simulation grid needs.
"""

import numpy as np

# CIE 1924 photopic V(λ), 380-780 nm, 5 nm step. Peak 1.0 at 555 nm.
_VLAMBDA_5NM = np.array([
    0.0000390, 0.0000640, 0.000120, 0.000217, 0.000396, 0.000640,
    0.00121, 0.00218, 0.00400, 0.00730, 0.0116, 0.01684, 0.0230,
    0.0298, 0.0380, 0.0480, 0.0600, 0.0739, 0.09098, 0.1126,
    0.13902, 0.1693, 0.20802, 0.2586, 0.3230, 0.4073, 0.5030,
    0.6082, 0.7100, 0.7932, 0.8620, 0.91485, 0.9540, 0.9803,
    0.99495, 1.0000, 0.9950, 0.9786, 0.9520, 0.9154, 0.8700,
    0.8163, 0.7570, 0.6949, 0.6310, 0.5668, 0.5030, 0.4412,
    0.3810, 0.3210, 0.2650, 0.2170, 0.1750, 0.1382, 0.1070,
    0.0816, 0.0610, 0.04458, 0.0320, 0.0232, 0.0170, 0.01192,
    0.00821, 0.005723, 0.004102, 0.002929, 0.002091, 0.001484,
    0.001047, 0.000740, 0.000520, 0.000361, 0.000249, 0.000172,
    0.000120, 0.0000848, 0.0000600, 0.0000424, 0.0000300,
    0.0000212, 0.0000149,
])

VLAMBDA_1NM_START = 380.0
VLAMBDA_1NM = np.interp(
    np.arange(380.0, 781.0, 1.0),
    np.arange(380.0, 781.0, 5.0),
    _VLAMBDA_5NM,
)

# CIE 1931 2° color matching functions, 400-700 nm, 10 nm step.
CMF_START = 400.0
CMF_STEP = 10.0
CMF_XBAR = np.array([
    0.0143, 0.0435, 0.1344, 0.2839, 0.3483, 0.3362, 0.2908, 0.1954,
    0.0956, 0.0320, 0.0049, 0.0093, 0.0633, 0.1655, 0.2904, 0.4334,
    0.5945, 0.7621, 0.9163, 1.0263, 1.0622, 1.0026, 0.8544, 0.6424,
    0.4479, 0.2835, 0.1649, 0.0874, 0.0468, 0.0227, 0.0114,
])
CMF_YBAR = np.array([
    0.000396, 0.00121, 0.0040, 0.0116, 0.023, 0.038, 0.060, 0.09098,
    0.13902, 0.20802, 0.323, 0.503, 0.710, 0.862, 0.954, 0.99495,
    0.995, 0.952, 0.870, 0.757, 0.631, 0.503, 0.381, 0.265,
    0.175, 0.107, 0.061, 0.032, 0.017, 0.00821, 0.004102,
])
CMF_ZBAR = np.array([
    0.0679, 0.2074, 0.6456, 1.3856, 1.7471, 1.7721, 1.6692, 1.2876,
    0.8130, 0.4652, 0.2720, 0.1582, 0.0782, 0.0422, 0.0203, 0.0087,
    0.0039, 0.0021, 0.0017, 0.0011, 0.0008, 0.00034, 0.00019, 0.00005,
    0.00002, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
])

# CIE D65 relative spectral power, 400-700 nm, 10 nm step (100 at 560 nm).
D65_RELATIVE = np.array([
    82.75, 91.49, 93.43, 86.68, 104.86, 117.01, 117.81, 114.86,
    115.92, 108.81, 109.35, 107.80, 104.79, 107.69, 104.41, 104.05,
    100.00, 96.33, 95.79, 88.69, 90.01, 89.60, 87.70, 83.29,
    83.70, 80.03, 80.21, 82.28, 78.28, 69.72, 71.61,
])

# XYZ (D65 white) -> linear sRGB.
XYZ_TO_SRGB = np.array([
    [3.2406, -1.5372, -0.4986],
    [-0.9689, 1.8758, 0.0415],
    [0.0557, -0.2040, 1.0570],
])

# Physical constants.
PLANCK_H = 6.62607015e-34  # J s
LIGHT_C = 2.99792458e8  # m/s
HC = PLANCK_H * LIGHT_C  # J m
LUMENS_PER_WATT_555 = 683.0
