#!/usr/bin/env python3
"""Regenerates data/rules_default.json.

Two kinds of predicate pairs:
  * modifier pairs: dropping a veridical modifier entails ("secretly buy" ->
    "buy"); dropping a non-veridical one ("nearly buy" -> "buy"), adding a
    modifier, or swapping it for another does not.
  * hypernym pairs inside four verb chains ordered specific to general:
    earlier entails later, the reverse does not.
"""
import json
import pathlib

CHAINS = [
    ["purchase", "buy", "acquire", "own"],
    ["assassinate", "murder", "kill", "attack"],
    ["defeat", "beat", "play", "face"],
    ["hire", "employ", "pay", "meet"],
]
VERBS = [verb for chain in CHAINS for verb in chain]
VERIDICAL = ["secretly", "publicly", "reluctantly", "quickly", "formally", "briefly"]
NON_VERIDICAL = ["nearly", "almost", "never", "allegedly", "supposedly", "hardly"]


def main():
    entailing, non_entailing = [], []
    for i, mod in enumerate(VERIDICAL):
        for verb in VERBS:
            specific = f"{mod} {verb}"
            entailing.append([specific, verb])
            non_entailing.append([verb, specific])
            non_entailing.append([f"{NON_VERIDICAL[i]} {verb}", verb])
            non_entailing.append([specific, f"{VERIDICAL[(i + 1) % len(VERIDICAL)]} {verb}"])
    for chain in CHAINS:
        for a in range(len(chain)):
            for b in range(a + 1, len(chain)):
                entailing.append([chain[a], chain[b]])
                non_entailing.append([chain[b], chain[a]])
    out = pathlib.Path(__file__).resolve().parent.parent / "data" / "rules_default.json"
    out.write_text(json.dumps({"entailing": entailing, "non_entailing": non_entailing}, indent=1) + "\n")


if __name__ == "__main__":
    main()
