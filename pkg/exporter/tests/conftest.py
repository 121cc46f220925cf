"""Shared fixtures: a miniature randomly initialized BERT saved to disk, a
small dataset file, and the six-slot template file."""

import pytest

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")

transformers.utils.logging.disable_progress_bar()

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "aspect", "is", ",", "opinion", "sentiment",
    "positive", "negative", "neutral", ".",
    "the", "salmon", "sushi", "was", "ultra", "fresh",
    "noo", "##dles", "were", "stick", "##y", "service",
    "slow", "and", "very", "good",
]

TEMPLATE = (
    "aspect is [MASK] , opinion is [MASK] , sentiment is positive . "
    "aspect is [MASK] , opinion is [MASK] , sentiment is negative . "
    "aspect is [MASK] , opinion is [MASK] , sentiment is neutral ."
)

DATA_LINES = (
    "the salmon sushi was ultra fresh####[([1, 2], [5], 'POS')]\n"
    "\n"
    "noodles were sticky####[([0], [2], 'NEG')]\n"
    "service####[]\n"
)


@pytest.fixture(scope="session")
def bert_dir(tmp_path_factory):
    from transformers import BertConfig, BertModel, BertTokenizer

    d = tmp_path_factory.mktemp("tinybert")
    (d / "vocab.txt").write_text("\n".join(VOCAB) + "\n")
    tok = BertTokenizer(str(d / "vocab.txt"), do_lower_case=True)
    cfg = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        max_position_embeddings=64,
    )
    torch.manual_seed(7)
    model = BertModel(cfg)
    model.save_pretrained(d)
    tok.save_pretrained(d)
    return d


@pytest.fixture(scope="session")
def data_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("data") / "train.txt"
    p.write_text(DATA_LINES)
    return p


@pytest.fixture(scope="session")
def template_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("tpl") / "template.txt"
    p.write_text(TEMPLATE + "\n")
    return p
