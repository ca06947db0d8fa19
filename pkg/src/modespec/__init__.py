"""Transverse mode spectra from intensity-difference scans of a wave field."""
from .modes import (ComplexField, GridSpec, ModeIndex, ModeSpectrum, PhysicalFrame, WeightSpectrum,
                    decompose, eval_hg, eval_lg, inner, mode_indices, synthesize)
from .algebra import Generator, generator_matrix, gouy_advance, rotate_spectrum
from .rays import compose, design_s_minus, design_s_plus, s_minus, s_plus, solve_compensator
from .propagation import apply_parity, apply_rotation, apply_s_minus, apply_s_plus, apply_train
from .interferometer import (Custom, IdentityC, IntensityScan, MinusIdentityC, ScanConfig, run_scan,
                             scan_analytic, scan_kernel, scan_train)
from .reconstruction import reconstruct_full, reconstruct_hg, sampling_bound

__version__ = "0.1.0"
