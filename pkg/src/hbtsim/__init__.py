"""hbtsim: simulate and analyze photon-correlation measurements of
blinking single-photon emitters.

The package generates time-tagged detection streams for a blinking
colour-centre-like emitter under cw or pulsed excitation, computes
start-stop and all-pairs coincidence histograms with their normalized
forms, and inverts the forward models: radiative lifetime, antibunching
dip, decay-rate-versus-power, saturation curve, on/off dwell times and
overall detection efficiency.
"""

__version__ = "0.1.0"

from .correlate import (G2Curve, Histogram, PeakSeries, cross_correlation,
                        integrate_peaks, normalize_g2, normalize_peak_counts,
                        pulse_decay_histogram, start_stop_histogram)
from .estimate import (IRFModel, background_correct_g2, fit_antibunching_cw,
                       fit_blinking, fit_exponential_decay, fit_rate_vs_power,
                       fit_saturation, infer_detection_efficiency, ple_optimum)
from .fitting import FitResult
from .model import (DetectionParams, EmitterParams, ExcitationCW,
                    ExcitationPulsed, PLETable, SaturationParams,
                    bunching_plateau, decay_rate_at_power, eval_cn_model,
                    eval_saturation, paper_detection, paper_emitter,
                    paper_saturation, predicted_saturated_rate,
                    pump_coefficient_for_doubling)
from .simulate import (apply_detection_chain, sample_telegraph,
                       simulate_attenuated_laser, simulate_cw, simulate_pulsed)
from .stream import TelegraphTrace, TimeTagStream, validate_stream
from .tagio import (BadMagicError, StreamFormatError, TimeTagFileError,
                    TruncatedFileError, read_timetags, write_timetags)

__all__ = [
    "__version__",
    # model
    "EmitterParams", "ExcitationCW", "ExcitationPulsed", "DetectionParams",
    "SaturationParams", "PLETable", "bunching_plateau", "eval_cn_model",
    "eval_saturation", "predicted_saturated_rate", "decay_rate_at_power",
    "pump_coefficient_for_doubling", "paper_emitter", "paper_detection",
    "paper_saturation",
    # streams & simulation
    "TimeTagStream", "TelegraphTrace", "validate_stream", "sample_telegraph",
    "simulate_cw", "simulate_pulsed", "simulate_attenuated_laser",
    "apply_detection_chain",
    # correlation
    "Histogram", "G2Curve", "PeakSeries", "start_stop_histogram",
    "cross_correlation", "normalize_g2", "integrate_peaks",
    "normalize_peak_counts", "pulse_decay_histogram",
    # estimation
    "FitResult", "IRFModel", "fit_exponential_decay", "fit_antibunching_cw",
    "fit_rate_vs_power", "fit_saturation", "fit_blinking",
    "infer_detection_efficiency", "background_correct_g2", "ple_optimum",
    # persistence
    "write_timetags", "read_timetags", "TimeTagFileError", "BadMagicError",
    "TruncatedFileError", "StreamFormatError",
]
