"""Regenerates the tiny randomly initialised model fixtures used by the tests.

Writes tiny_t5/ (encoder, decoder, tokenizer, causal LM, manifest) and
tiny_t5/reference.json holding attention vectors computed with the native
PyTorch modules, which the Rust tests compare against.

    python3 gen_tiny_models.py
"""

import hashlib
import json
import math
import os

import torch
from tokenizers import Tokenizer, decoders, models, normalizers, pre_tokenizers, processors, trainers
from transformers import T5Config, T5ForConditionalGeneration

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "tiny_t5")

CORPUS = [
    "The thief hid the stolen painting in a barn near a farmhouse.",
    "Who hid the painting? The thief did, before the police arrived.",
    "In 1999 the river flooded the old mill and the bridge.",
    "Marie Curie won the Nobel Prize in physics and chemistry.",
    "The capital of France is Paris, a city on the Seine.",
    "How many goals did the team score in the second half?",
    "A farmer, his dog and three cats lived on the hill.",
    "Quietly, the detective followed footprints across the muddy field.",
    "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJKLMNOPQRSTUVWXYZ 0123456789 .,;:!?'\"()-",
]

PROBES = [
    ("The thief hid the painting in a barn near a farmhouse.", "Where did the thief hide the painting?", "in a barn"),
    ("Marie Curie won the Nobel Prize in physics.", "Who won the prize?", "Marie Curie"),
    ("In 1999 the river flooded the old mill.", "When did the river flood?", "1999"),
    ("The capital of France is Paris.", "What is the capital of France?", "Paris"),
    ("A farmer, his dog and three cats lived on the hill.", "How many cats?", "three"),
    ("The bridge was painted red by the city workers last spring.", "What color is the bridge?", "red"),
    ("Tom gave Anna a blue bicycle for her birthday.", "What did Tom give Anna?", "a blue bicycle"),
    ("The museum opens at nine and closes at five.", "When does the museum open?", "at nine"),
    ("Water boils at one hundred degrees.", "At what temperature does water boil?", "one hundred degrees"),
    ("The old lighthouse stands on a rocky island north of the harbor.", "Where is the lighthouse?", "on a rocky island"),
]


def build_tokenizer():
    tok = Tokenizer(models.Unigram())
    tok.normalizer = normalizers.NFKC()
    tok.pre_tokenizer = pre_tokenizers.Metaspace(replacement="▁", prepend_scheme="always")
    tok.decoder = decoders.Metaspace(replacement="▁", prepend_scheme="always")
    trainer = trainers.UnigramTrainer(
        vocab_size=160,
        special_tokens=["<pad>", "</s>", "<unk>", "<s>"],
        unk_token="<unk>",
        initial_alphabet=list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:!?'\"()-"),
    )
    tok.train_from_iterator(CORPUS * 20, trainer)
    return tok


def with_eos(tok):
    eos = tok.token_to_id("</s>")
    tok.post_processor = processors.TemplateProcessing(single="$A </s>", special_tokens=[("</s>", eos)])
    return tok


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        h.update(f.read())
    return h.hexdigest()


def additive(mask):
    # Explicit [B, 1, 1, S] additive mask; the library's own mask builder
    # traces into gather ops that tract mis-infers.
    return (1.0 - mask[:, None, None, :].float()) * torch.finfo(torch.float32).min


class Encoder(torch.nn.Module):
    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, input_ids, attention_mask):
        o = self.model.encoder(
            input_ids=input_ids, attention_mask=additive(attention_mask), output_attentions=True, return_dict=True
        )
        return (o.last_hidden_state, *o.attentions)


class Decoder(torch.nn.Module):
    def __init__(self, model):
        super().__init__()
        self.model = model

    def forward(self, decoder_input_ids, encoder_hidden_states, encoder_attention_mask):
        t = decoder_input_ids.shape[1]
        causal = torch.ones(t, t).tril()[None, None]
        o = self.model.decoder(
            input_ids=decoder_input_ids,
            attention_mask=(1.0 - causal) * torch.finfo(torch.float32).min,
            encoder_hidden_states=encoder_hidden_states,
            encoder_attention_mask=additive(encoder_attention_mask),
            output_attentions=True,
            use_cache=False,
            return_dict=True,
        )
        return tuple(o.cross_attentions)


class CausalLm(torch.nn.Module):
    """One-layer causal transformer; just enough to produce next-token logits."""

    def __init__(self, vocab, dim=32, max_len=128):
        super().__init__()
        self.tok = torch.nn.Embedding(vocab, dim)
        self.pos = torch.nn.Embedding(max_len, dim)
        self.qkv = torch.nn.Linear(dim, 3 * dim)
        self.mlp = torch.nn.Sequential(torch.nn.Linear(dim, 2 * dim), torch.nn.GELU(), torch.nn.Linear(2 * dim, dim))
        self.norm = torch.nn.LayerNorm(dim)
        self.head = torch.nn.Linear(dim, vocab)

    def forward(self, input_ids):
        n = input_ids.shape[1]
        h = self.tok(input_ids) + self.pos(torch.arange(n).unsqueeze(0))
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        scores = q @ k.transpose(1, 2) / math.sqrt(q.shape[-1])
        causal = torch.ones(n, n).tril() == 0
        scores = scores.masked_fill(causal, float("-inf"))
        h = h + torch.softmax(scores, dim=-1) @ v
        h = h + self.mlp(h)
        return self.head(self.norm(h))


def main():
    os.makedirs(OUT, exist_ok=True)
    torch.manual_seed(1234)
    base_tok = build_tokenizer()
    base_tok.save(os.path.join(OUT, "lm_tokenizer.json"))
    tok = with_eos(Tokenizer.from_str(base_tok.to_str()))
    tok.save(os.path.join(OUT, "tokenizer.json"))
    vocab = tok.get_vocab_size()

    cfg = T5Config(
        vocab_size=vocab, d_model=32, d_kv=8, d_ff=64, num_layers=2, num_decoder_layers=3, num_heads=4,
        feed_forward_proj="gated-gelu", decoder_start_token_id=0, pad_token_id=0, eos_token_id=1,
        relative_attention_num_buckets=8, relative_attention_max_distance=32,
    )
    cfg._attn_implementation = "eager"
    model = T5ForConditionalGeneration(cfg).eval()
    # Sharper attention than the default init so scores are not all uniform.
    with torch.no_grad():
        for p in model.parameters():
            p.mul_(3.0)

    ids = torch.tensor([tok.encode("a b c d e f").ids])
    mask = torch.ones_like(ids)
    # Wrappers start in train mode and export restores it; keep dropout off.
    enc = Encoder(model).eval()
    dec = Decoder(model).eval()
    n_enc, n_dec = cfg.num_layers, cfg.num_decoder_layers
    torch.onnx.export(
        enc, (ids, mask), os.path.join(OUT, "encoder.onnx"), dynamo=False, opset_version=17,
        input_names=["input_ids", "attention_mask"],
        output_names=["last_hidden_state"] + [f"self_attn_{i}" for i in range(n_enc)],
        dynamic_axes={"input_ids": {1: "S"}, "attention_mask": {1: "S"}},
    )
    hidden = model.encoder(input_ids=ids, attention_mask=mask).last_hidden_state
    torch.onnx.export(
        dec, (torch.tensor([[0, 5]]), hidden, mask), os.path.join(OUT, "decoder.onnx"), dynamo=False, opset_version=17,
        input_names=["decoder_input_ids", "encoder_hidden_states", "encoder_attention_mask"],
        output_names=[f"cross_attn_{i}" for i in range(n_dec)],
        dynamic_axes={"decoder_input_ids": {1: "T"}, "encoder_hidden_states": {1: "S"}, "encoder_attention_mask": {1: "S"}},
    )

    bos = tok.token_to_id("<s>")
    lm = CausalLm(vocab).eval()
    torch.onnx.export(
        lm, (torch.tensor([[bos, 5, 6]]),), os.path.join(OUT, "lm.onnx"), dynamo=False, opset_version=17,
        input_names=["input_ids"], output_names=["logits"], dynamic_axes={"input_ids": {1: "S"}},
    )

    model.eval()
    references = []
    with torch.no_grad():
        for context, query, target in PROBES:
            full = tok.encode(context + " " + query)
            in_ids = torch.tensor([full.ids])
            m = torch.ones_like(in_ids)
            query_rows = [
                i for i, ((start, _), sp) in enumerate(zip(full.offsets, full.special_tokens_mask))
                if sp == 0 and start >= len(context)
            ]
            eo = model.encoder(input_ids=in_ids, attention_mask=m, output_attentions=True, return_dict=True)
            first = model.decoder(input_ids=torch.tensor([[0]]), encoder_hidden_states=eo.last_hidden_state,
                                  encoder_attention_mask=m, output_attentions=True, return_dict=True)
            target_ids = [i for i in base_tok.encode(target).ids]
            forced = torch.tensor([[0] + target_ids[:-1]])
            total = model.decoder(input_ids=forced, encoder_hidden_states=eo.last_hidden_state,
                                  encoder_attention_mask=m, output_attentions=True, return_dict=True)
            lm_ids = base_tok.encode(context)
            logits = lm(torch.tensor([[bos] + lm_ids.ids]))[0]
            logp = torch.log_softmax(logits.double(), dim=-1)
            surprisal = [-(logp[i, t].item()) / math.log(2) for i, t in enumerate(lm_ids.ids)]
            references.append({
                "context": context,
                "query": query,
                "target": target,
                "input_ids": full.ids,
                "offsets": full.offsets,
                "special_tokens_mask": full.special_tokens_mask,
                # [layer][head][encoder position]
                "cross_first": [a[0, :, 0, :].tolist() for a in first.cross_attentions],
                # [layer][head][step][encoder position]
                "cross_total": [a[0].tolist() for a in total.cross_attentions],
                # [layer][head][row][key pos], rows restricted to query_rows
                "query_rows": query_rows,
                "self_attn": [a[0][:, query_rows, :].tolist() for a in eo.attentions],
                "lm_ids": lm_ids.ids,
                "lm_offsets": lm_ids.offsets,
                "surprisal_bits": surprisal,
            })

    files = ["encoder.onnx", "decoder.onnx", "tokenizer.json", "lm.onnx", "lm_tokenizer.json"]
    manifest = {
        "model_name": "tiny-random-t5",
        "layer_count": n_dec,
        "head_count": cfg.num_heads,
        "start_token_id": cfg.decoder_start_token_id,
        "max_length": 96,
        "cross_attention_outputs": [f"cross_attn_{i}" for i in range(n_dec)],
        "self_attention_outputs": [f"self_attn_{i}" for i in range(n_enc)],
        "causal_lm": {"file": "lm.onnx", "tokenizer": "lm_tokenizer.json", "bos_token_id": bos, "max_length": 128},
        "checksums": {f: sha256(os.path.join(OUT, f)) for f in files},
    }
    with open(os.path.join(OUT, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    with open(os.path.join(OUT, "reference.json"), "w") as f:
        json.dump(rounded(references), f, separators=(",", ":"))


def rounded(x, digits=6):
    if isinstance(x, float):
        return round(x, digits)
    if isinstance(x, list):
        return [rounded(v, digits) for v in x]
    if isinstance(x, dict):
        return {k: rounded(v, digits) for k, v in x.items()}
    return x


if __name__ == "__main__":
    main()
