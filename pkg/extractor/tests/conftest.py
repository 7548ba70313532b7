"""Shared fixtures: a tiny character-level causal LM built on the fly.

The hub is not assumed reachable, so the tests construct a byte-level
GPT-2 from scratch: the 256 byte symbols plus two merge tokens, random
seeded weights, saved to a temp directory and loaded back through the
Auto* classes exactly like a published checkpoint would be.

Two tokenizer variants share the vocabulary:
  * clean  — one merge ("Ġ","y"), entirely within word boundaries, so
             every word round-trips;
  * messy  — one merge ("o","Ġ") that swallows the space after any word
             ending in "o", breaking round-trip decoding for such words.
The messy variant disables the usual word-boundary pre-tokenization so
the cross-boundary merge can actually fire.
"""

import json

import pandas as pd
import pytest
import torch
from tokenizers import Tokenizer, decoders, models, pre_tokenizers
from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast


def _byte_symbols():
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


def _make_tokenizer(vocab, merges, word_boundaries=True):
    tk = Tokenizer(models.BPE(vocab=vocab, merges=merges))
    tk.pre_tokenizer = pre_tokenizers.ByteLevel(
        add_prefix_space=False, use_regex=word_boundaries
    )
    tk.decoder = decoders.ByteLevel()
    return PreTrainedTokenizerFast(tokenizer_object=tk)


@pytest.fixture(scope="session")
def model_dirs(tmp_path_factory):
    """Build and save the tiny model with both tokenizer variants.

    Returns (clean_dir, messy_dir); each directory is loadable with
    AutoTokenizer / AutoModelForCausalLM.  n_positions is kept small (48)
    so a moderately long text exercises the left-truncation path.
    """
    base = tmp_path_factory.mktemp("tinylm")
    symbols = list(_byte_symbols().values())
    vocab = {s: i for i, s in enumerate(symbols)}
    vocab["Ġy"] = len(vocab)  # merged " y"
    vocab["oĠ"] = len(vocab)  # merged "o " (cross-boundary, messy only)

    config = GPT2Config(
        vocab_size=len(vocab),
        n_positions=48,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=None,
        eos_token_id=None,
    )
    torch.manual_seed(1234)
    model = GPT2LMHeadModel(config).eval()

    clean = base / "clean"
    messy = base / "messy"
    for d, merges, boundaries in (
        (clean, [("Ġ", "y")], True),
        (messy, [("o", "Ġ")], False),
    ):
        d.mkdir()
        tok = _make_tokenizer(vocab, merges, word_boundaries=boundaries)
        tok.save_pretrained(d)
        model.save_pretrained(d)
    return str(clean), str(messy)


@pytest.fixture(scope="session")
def clean_model_dir(model_dirs):
    return model_dirs[0]


@pytest.fixture(scope="session")
def messy_model_dir(model_dirs):
    return model_dirs[1]


# Three short Spanish texts.  Text 1 fits inside the 48-token window,
# text 2 overflows it, text 3 contains "y" (a single merged token in the
# clean tokenizer) and words ending in "o" (flagged under the messy one).
TEXTS = [
    "el viento norte y el sol discutían",
    "un viajero llegó envuelto en una capa gruesa y los dos acordaron una prueba",
    "el sol brilló y el viajero se quitó la capa",
]


@pytest.fixture(scope="session")
def words_frame():
    rows = []
    wid = 1
    for text_id, text in enumerate(TEXTS, start=1):
        for pos, surface in enumerate(text.split(" ")):
            rows.append(
                {
                    "word_id": wid,
                    "text_id": text_id,
                    "pos_in_text": pos,
                    "surface": surface,
                }
            )
            wid += 1
    return pd.DataFrame(rows)


@pytest.fixture()
def words_file(tmp_path, words_frame):
    path = tmp_path / "words.tsv"
    words_frame.to_csv(path, sep="\t", index=False)
    return path
