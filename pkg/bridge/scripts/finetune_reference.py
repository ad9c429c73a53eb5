"""Reference recipe for low-rank adapter finetuning on generated scenario text.

This script documents the training configuration; it is NOT part of the
test suite and reproducing published accuracy figures requires multi-GPU
budgets outside this repository's scope.

Configuration notes:
  - adapters: rank 16, alpha 16, dropout 0.05
  - target modules: the write-ups disagree between query+value and
    query+key attention projections, so --target-modules is required and
    offers both; no default is taken
  - optimizer: AdamW, learning rate 5e-4, batch size 8
  - steps: ~10k for 36k-scenario training sets; ~6k for 4.5k-scenario sets
    (convergence was typically observed around these budgets)

Input is the train.txt produced by `causaltext gen-data` (one scenario
per line).
"""

from __future__ import annotations

import argparse
import sys

TARGET_MODULE_CHOICES = {
    # LLaMA-family projection names
    "qv": ["q_proj", "v_proj"],
    "qk": ["q_proj", "k_proj"],
}


def parse_args() -> argparse.Namespace:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--model", required=True, help="base causal LM id or path")
    p.add_argument("--train-file", required=True, help="train.txt (one scenario per line)")
    p.add_argument("--output-dir", required=True)
    p.add_argument(
        "--target-modules",
        required=True,
        choices=sorted(TARGET_MODULE_CHOICES),
        help="qv = query+value projections, qk = query+key projections",
    )
    p.add_argument("--rank", type=int, default=16)
    p.add_argument("--alpha", type=int, default=16)
    p.add_argument("--dropout", type=float, default=0.05)
    p.add_argument("--lr", type=float, default=5e-4)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    return p.parse_args()


def main() -> int:
    args = parse_args()
    try:
        import torch
        from peft import LoraConfig, get_peft_model
        from torch.utils.data import DataLoader
        from transformers import AutoModelForCausalLM, AutoTokenizer
    except ImportError as e:
        print(f"missing training dependency: {e}; install torch, transformers, peft", file=sys.stderr)
        return 2

    torch.manual_seed(args.seed)
    tokenizer = AutoTokenizer.from_pretrained(args.model)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    model = AutoModelForCausalLM.from_pretrained(args.model)
    lora = LoraConfig(
        r=args.rank,
        lora_alpha=args.alpha,
        lora_dropout=args.dropout,
        target_modules=TARGET_MODULE_CHOICES[args.target_modules],
        task_type="CAUSAL_LM",
    )
    model = get_peft_model(model, lora)
    model.print_trainable_parameters()

    with open(args.train_file, encoding="utf-8") as f:
        lines = [l.strip() for l in f if l.strip()]

    def collate(batch):
        enc = tokenizer(batch, return_tensors="pt", padding=True, truncation=True)
        enc["labels"] = enc["input_ids"].masked_fill(enc["attention_mask"] == 0, -100)
        return enc

    loader = DataLoader(lines, batch_size=args.batch_size, shuffle=True, collate_fn=collate)
    optimizer = torch.optim.AdamW(model.parameters(), lr=args.lr)
    device = "cuda" if torch.cuda.is_available() else "cpu"
    model.to(device)
    model.train()

    step = 0
    while step < args.max_steps:
        for batch in loader:
            batch = {k: v.to(device) for k, v in batch.items()}
            loss = model(**batch).loss
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            step += 1
            if step % 100 == 0:
                print(f"step {step}: loss {loss.item():.4f}")
            if step >= args.max_steps:
                break

    model.save_pretrained(args.output_dir)
    tokenizer.save_pretrained(args.output_dir)
    print(f"saved adapters to {args.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
