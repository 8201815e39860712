"""Sequence-labeling toolkit for health-domain named-entity recognition.

Three taggers over BIO-annotated corpora: a linear-chain CRF baseline on
fixed input features, a bidirectional recurrent tagger with per-token
softmax output, and the same network with a transition-structured output
layer decoded by Viterbi.  Word-level, character-level, and hand-crafted
feature representations can be combined; word vectors can be loaded from
text tables, concatenated across general and domain-specific sources,
and retrained from co-occurrence counts.  Evaluation is strict
entity-level precision/recall/F1.
"""

__version__ = "0.1.0"
