"""zfmag: zero-field AC magnetometry simulator for spin-1 clock sensors.

A numpy/scipy library for Monte Carlo simulation of RF-dressed spin-1
sensors under microwave dynamical-decoupling control: spin-1 operator
algebra, Ornstein-Uhlenbeck noise channels, rotating-wave and lab-frame
Hamiltonians, stochastic unitary propagation, coherence-time extraction
and sensing-spectrum scans.
"""

from .units import ghz, khz, mhz, ns, to_mhz, to_us, us
from .spin1 import (SX, SY, SZ, KET_0, KET_MINUS, KET_MINUS1, KET_PLUS,
                    KET_PLUS1, SensorEigensystem, SensorParams, eigensystem,
                    energy_vs_field_scan, from_pm_basis, spin_operators,
                    static_hamiltonian, to_pm_basis)
from .noise import (NoiseChannelSet, NoiseConfig, OuParams, OuProcess,
                    diffusion_from_relative_error, diffusion_from_t2star,
                    dump_noise_csv)
from .hamiltonian import (DriveConfig, FrameSnapshot, ResonanceError,
                          SignalConfig, effective_hamiltonian,
                          lab_frame_hamiltonian, rotating_frame_hamiltonian,
                          two_level_free_hamiltonian)
from .sequence import (LDD8B_PHASES, PulseSequence, ResponseFunction, Segment,
                       accumulated_phase, build_sequence, fourier_coefficient,
                       fourier_coefficient_numeric, ideal_response,
                       resonance_tau, response_function, sequence_from_dict,
                       sequence_from_text)
from .engine import (EngineError, EnsembleResult, IntegratorConfig,
                     SamplingConfig, Trajectory, exact_free_propagator,
                     perturbative_free_propagator, pulse_propagator,
                     run_ensemble, run_trajectory, step_propagator)
from .analysis import (SpectrumScan, T2Fit, Table1Cell, fit_t2,
                       reproduce_table1, sensitivity_enhancement,
                       spectrum_scan)

__version__ = "0.1.0"
