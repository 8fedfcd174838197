import numpy as np
import pytest


@pytest.fixture(scope="session")
def toy_model_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy_model")
    rng = np.random.default_rng(7)
    table = rng.uniform(-1.0, 1.0, size=(12, 4)).astype(np.float32)
    np.save(root / "embeddings.npy", table)
    tokens = ["[UNK]"] + [f"w{i}" for i in range(1, 12)]
    (root / "vocab.txt").write_text("\n".join(tokens) + "\n", encoding="utf-8")
    return root


@pytest.fixture(scope="session")
def tiny_hf_dir(tmp_path_factory):
    """A randomly initialized miniature BERT saved locally (no downloads)."""
    from transformers import BertConfig, BertModel, BertTokenizer

    root = tmp_path_factory.mktemp("tiny_bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + [f"tok{i}" for i in range(59)]
    vocab_file = root / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=24,
        max_position_embeddings=48,
    )
    import torch

    torch.manual_seed(11)
    BertModel(config).save_pretrained(root)
    BertTokenizer(str(vocab_file)).save_pretrained(root)
    return root
