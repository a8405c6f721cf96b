import logging
import math
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import norm

from utils.channel import complex_normal
from utils.errors import DegenerateInputError, InvalidInputError

logger = logging.getLogger(__name__)

BITS_PER_SYMBOL = 2

# Gray mapping: first bit sets the in-phase sign, second bit the quadrature sign
CONSTELLATION = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0)


def modulate_4qam(bits: Sequence[int]) -> np.ndarray:
    """Map bit pairs to unit-energy QPSK symbols (+-1 +-j)/sqrt(2)"""
    bits = np.asarray(bits, dtype=int).ravel()
    if bits.size % BITS_PER_SYMBOL:
        raise InvalidInputError(f"4-QAM needs an even number of bits, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise InvalidInputError("Bits must be 0 or 1")
    pairs = bits.reshape(-1, BITS_PER_SYMBOL)
    return CONSTELLATION[2 * pairs[:, 0] + pairs[:, 1]]


def demodulate_4qam(received: np.ndarray, gain: complex = 1.0) -> np.ndarray:
    """
    Coherent minimum-distance detection

    Args:
        received (np.ndarray): Beamformer outputs
        gain (complex): Known effective channel gain the receiver equalizes with

    Returns:
        np.ndarray: Detected bits, two per symbol
    """
    if gain == 0:
        raise DegenerateInputError("Cannot equalize with a zero channel gain")
    equalized = np.asarray(received) / gain
    bits = np.empty((equalized.size, BITS_PER_SYMBOL), dtype=int)
    bits[:, 0] = np.real(equalized) < 0.0
    bits[:, 1] = np.imag(equalized) < 0.0
    return bits.ravel()


def qpsk_reference_ser(snr) -> np.ndarray:
    """Symbol error rate of Gray QPSK in AWGN at symbol SNR ``snr``: 2Q(sqrt(snr)) - Q(sqrt(snr))^2"""
    q = norm.sf(np.sqrt(np.asarray(snr, dtype=float)))
    return 2.0 * q - q ** 2


def simulate_symbol_errors(signal_gain: complex, detector_gain: complex, interference_gains: np.ndarray,
                           noise_variance: float, n_symbols: int, rng: np.random.Generator,
                           chunk: int = 100_000) -> Tuple[int, int]:
    """
    Send random 4-QAM symbols through a beamformed scalar link

    Args:
        signal_gain (complex): True sqrt(P_0) u^H H_0 theta0
        detector_gain (complex): Gain the receiver believes (from estimated channels)
        interference_gains (np.ndarray): True sqrt(P_i) u^H H_i theta0 of each interferer
        noise_variance (float): Variance of u^H n after beamforming
        n_symbols (int): Number of signal symbols
        rng (np.random.Generator): Random stream

    Returns:
        Tuple[int, int]: Symbol errors and symbols sent
    """
    if n_symbols < 1:
        raise InvalidInputError("n_symbols must be positive")
    if noise_variance < 0.0:
        raise InvalidInputError("Noise variance must be non-negative")
    interference_gains = np.asarray(interference_gains, dtype=complex).ravel()

    errors = 0
    remaining = n_symbols
    while remaining:
        size = min(chunk, remaining)
        bits = rng.integers(0, 2, size=BITS_PER_SYMBOL * size)
        received = signal_gain * modulate_4qam(bits)
        for gain in interference_gains:
            received = received + gain * CONSTELLATION[rng.integers(0, 4, size=size)]
        received = received + complex_normal(rng, size, noise_variance)

        detected = demodulate_4qam(received, detector_gain).reshape(-1, BITS_PER_SYMBOL)
        errors += int(np.count_nonzero(np.any(detected != bits.reshape(-1, BITS_PER_SYMBOL), axis=1)))
        remaining -= size
    return errors, n_symbols
