"""test vocab"""
import pytest

import seq2seq_lrp.model.vocab as tested
from seq2seq_lrp.exceptions import Seq2SeqLrpError


def test_special_ids():
    vocab = tested.Vocab.synthetic(5, {3: "cat"})
    assert vocab.tokens == ["<unk>", "<s>", "</s>", "cat", "tok4"]
    assert tested.PAD_ID == tested.UNKNOWN_ID == vocab.lookup("<unk>")
    assert vocab.lookup("<s>") == tested.START_ID
    assert vocab.lookup("</s>") == tested.STOP_ID


def test_encode_decode():
    vocab = tested.Vocab.synthetic(5, {3: "cat", 4: "dog"})
    assert vocab.encode(["dog", "bird", "cat"]) == [4, tested.UNKNOWN_ID, 3]
    assert vocab.decode([3, 4]) == ["cat", "dog"]
    assert vocab.to_text([3, 2]) == "cat </s>"
    with pytest.raises(Seq2SeqLrpError, match="out of range"):
        vocab.token_of(5)


def test_invalid_vocabularies():
    with pytest.raises(Seq2SeqLrpError, match="special tokens"):
        tested.Vocab(["a", "b", "c"])
    with pytest.raises(Seq2SeqLrpError, match="Duplicate"):
        tested.Vocab(["<unk>", "<s>", "</s>", "a", "a"])
    with pytest.raises(Seq2SeqLrpError, match="Invalid token"):
        tested.Vocab(["<unk>", "<s>", "</s>", "a b"])
    with pytest.raises(Seq2SeqLrpError):
        tested.Vocab.synthetic(2, {})


def test_load_save(tmp_path):
    vocab = tested.Vocab.synthetic(6, {3: "x"})
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    assert path.read_text(encoding="utf-8").splitlines()[3] == "x"
    assert tested.Vocab.load(path) == vocab
    assert len(tested.Vocab.load(path)) == 6
