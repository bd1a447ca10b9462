"""Face detection on HEVC intra bitstreams from entropy-decoder output alone.

Pipeline: Annex-B split and parameter sets (bitio, paramsets), CABAC parse
with per-PU bin accounting (cabac, syntax), IPM/PUS/BN feature images
(featimg), a small CNN (cnn) and the experiment harness (harness).
"""
__version__ = "0.1.0"
