"""Per-word next-word probabilities from causal language models.

Reads a words.tsv corpus table, reconstructs each text, runs a pretrained
causal LM over it, and emits a preds.tsv mapping every word (except the
text-initial one, which has no context) to its probability given the
preceding text.  Word probabilities are products of subword-token
probabilities under the model's tokenizer.
"""

from .alignment import WordAlignment, align_words, build_text, verify_alignment
from .corpus import load_words
from .extract import ExtractionResult, extract_word_probs, write_preds

__version__ = "0.1.0"

__all__ = [
    "WordAlignment",
    "align_words",
    "build_text",
    "verify_alignment",
    "load_words",
    "ExtractionResult",
    "extract_word_probs",
    "write_preds",
]
