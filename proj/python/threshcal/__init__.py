"""Decision thresholds for continuous [0,1] evaluation scores with
PASS/FAIL ground truth: z-intervals, KDE + Bayes posteriors, empirical
recall, ROC/PR selection and split conformal prediction, evaluated under
stratified k-fold cross-validation."""

from threshcal._threshcal import *  # noqa: F401,F403
from threshcal._threshcal import __doc__ as _core_doc  # noqa: F401
