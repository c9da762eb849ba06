"""Seven-component Gaussian mixture approximation to the log chi-square(1)
distribution, from Kim, Shephard & Chib (1998), Table 4.

The linearized observation equation log y_t^2 = h_t + z_t has
z_t = log eps_t^2 with eps_t ~ N(0,1). The mixture represents z_t as
N(m_i - 1.2704, v_i^2) with probability q_i; 1.2704 is (minus) the mean
of log chi-square(1).
"""
import numpy as np

MIXTURE_WEIGHTS = np.array(
    [0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750]
)
MIXTURE_MEANS_RAW = np.array(
    [-10.12999, -3.97281, -8.56686, 2.77786, 0.61942, 1.79518, -1.08819]
)
MIXTURE_VARIANCES = np.array(
    [5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261]
)

LOG_CHI2_MEAN_OFFSET = 1.2704

# component means of log eps^2 itself
MIXTURE_MEANS = MIXTURE_MEANS_RAW - LOG_CHI2_MEAN_OFFSET
