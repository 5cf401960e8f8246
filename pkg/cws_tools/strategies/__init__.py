# -*- coding: utf-8 -*-
from .controlled import CircularTraining, JointTraining, JointTrainingPlus, SeparateTraining
from .fine_tuning import WeakThenFineTuneAll, WeakThenFineTuneRepresentation, WeakThenFineTuneSupervision
from .full_only import FullSupervisionOnly
from .label_inference import LabelGenerator, NeuralLabelInference, nli_generate_labels
from .weak_only import WeakAnnotator, WeakSupervisionOnly

STRATEGY_CLASS_MAPPINGS = {
    "WA": WeakAnnotator,
    "WSO": WeakSupervisionOnly,
    "FSO": FullSupervisionOnly,
    "WS_FT": WeakThenFineTuneAll,
    "WS_SFT": WeakThenFineTuneSupervision,
    "WS_RFT": WeakThenFineTuneRepresentation,
    "NLI": NeuralLabelInference,
    "CWS_JT": JointTraining,
    "CWS_JT_PLUS": JointTrainingPlus,
    "CWS_ST": SeparateTraining,
    "CWS_CT": CircularTraining,
}

__all__ = [
    "STRATEGY_CLASS_MAPPINGS",
    "LabelGenerator",
    "nli_generate_labels",
]
