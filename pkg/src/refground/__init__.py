"""Proposal-based visual grounding on synthetic scenes.

End-to-end pipeline: a small autodiff tensor engine (`ndauto`), a toy
multimodal grounding network (`model`, `refer`, `discrim`), set-prediction
training (`train`), the generalized grounding metric suite (`evalkit`),
dataset tooling (`data`), and a command-line interface (`cli`).
"""

__version__ = "0.1.0"
