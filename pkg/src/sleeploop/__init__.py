"""Closed-loop sleep modulation engine.

Multichannel EEG flows in from recordings, a simulated device, or a synthetic
sleeper; sleep stages are decoded per 30 s epoch; slow waves trigger
phase-timed acoustic stimuli; and bedding temperature is steered by the
decoded stage stream. Everything rides on an in-process typed pub/sub graph
with a swappable clock so whole nights replay deterministically.
"""

__version__ = "0.1.0"
