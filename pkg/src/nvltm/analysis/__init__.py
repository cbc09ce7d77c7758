"""Data reduction: fits, lock-in demodulation, spectra and sensitivity."""
