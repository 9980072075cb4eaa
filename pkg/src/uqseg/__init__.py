"""uqseg: uncertainty-aware measurement for binary image segmentation.

Predict per-pixel foreground probabilities with any pluggable model, sample
them under test-time augmentation or stochastic forward passes, decompose
the per-pixel uncertainty into data and model parts, derive clinical-style
measurements (ellipse circumference, longest-side length) from the final
mask, and triage the results over HTTP.
"""

from .analysis import (CaseRecord, ConfusionCounts, UncErrorHistogram,
                       batch_report, check_decision, confusion,
                       default_ood_threshold, iou, ood_flag,
                       relative_error_pct, report_csv, unc_error_histogram)
from .errors import (DataError, EllipseFitError, FormatError,
                     NoForegroundError, PredictorError, UqsegError)
from .geometry import (Contour, EllipseFit, Measurement, OrientedRect,
                       contour_area, convex_hull, ellipse_circumference_px,
                       extract_contours, femur_length_px, fit_ellipse,
                       largest_contour, measure, min_area_rect)
from .kernels import BACKEND, available_backends
from .phantom import (PhantomSpec, analytic_mask, generate_dataset,
                      generate_phantom, load_dataset_index, noise_raster,
                      sample_spec)
from .pipeline import RunConfig, load_records, process_case, run
from .predictor import (ExternalPredictor, Predictor, SigmoidPredictor,
                        SigmoidPredictorParams, make_predictor,
                        mcd_sample_stack)
from .raster import (BinaryMask, Calibration, CaseMeta, Raster, binarize,
                     load_image, load_mask, load_probmap,
                     load_uncertainty_map, save_heatmap_pgm, save_image,
                     save_mask, save_probmap, save_uncertainty_map)
from .seeding import derive_seed, rng_for
from .tta import (AugmentationPriors, SampleStack, TransformSpec,
                  aggregate_mean, aggregate_mode, apply_transform,
                  baseline_stack, invert_spatial, sample_transform,
                  tta_sample_stack)
from .uncertainty import (EPS, UncertaintyMaps, decompose, ekl, entropy,
                          expected_softmax, image_uncertainty_score, kl_bits,
                          max_probability, variance)

__version__ = "0.1.0"
