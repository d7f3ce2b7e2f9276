"""Train the graphone G2P model on the twelve bundled example rows and show
how each word is segmented and transduced.

    python3 demos/g2p_examples.py
"""

from dialect_asr.g2p import evaluate_per, example_cases, train, transduce


def main() -> None:
    cases = example_cases()
    model = train([(c.word, c.expected_phones) for c in cases])
    print(f"EM log-likelihood per iteration: {[round(x, 2) for x in model.log_likelihoods]}")
    for c in cases:
        seg = model.segmentations[(c.word, c.expected_phones)]
        pieces = " ".join(f"{g or '_'}|{'.'.join(p) or '_'}" for g, p in seg)
        print(f"{c.category:<18} {c.word:<12} {' '.join(transduce(model, c.word)):<20} {pieces}")
    for category, per in evaluate_per(model, cases).items():
        print(f"PER {category:<18} {per:.2f}")


if __name__ == "__main__":
    main()
