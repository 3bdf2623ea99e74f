import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from spkdbn.embeddings import Dataset, Embedding, SynthConfig, generate_synthetic, save_embeddings


def unlabel(dataset: Dataset) -> Dataset:
    return Dataset.from_embeddings(
        [Embedding(e.utterance_id, None, e.values) for e in dataset.embeddings]
    )


def make_experiment(root: Path, data_seed: int = 0, master_seed: int = 7,
                    num_speakers: int = 20, dim: int = 50, spread_ratio: float = 0.2):
    """Write a small synthetic single-session experiment and return its
    config key/value pairs (scaled-down presets, depth 1)."""
    root.mkdir(parents=True, exist_ok=True)
    background = unlabel(
        generate_synthetic(SynthConfig(40, 5, dim, 1.0, spread_ratio, seed=data_seed + 1000))
    )
    save_embeddings(background, root / "background.txt")

    # 1 enrollment + 2 test sessions per speaker
    full = generate_synthetic(SynthConfig(num_speakers, 3, dim, 1.0, spread_ratio, seed=data_seed))
    enroll = [e for e in full.embeddings if e.utterance_id.endswith("sess000")]
    test = [e for e in full.embeddings if not e.utterance_id.endswith("sess000")]
    save_embeddings(Dataset.from_embeddings(enroll), root / "enroll.txt")
    save_embeddings(Dataset.from_embeddings(unlabel(Dataset.from_embeddings(test)).embeddings),
                    root / "test.txt")

    speakers = sorted({e.speaker_id for e in enroll})
    with open(root / "trials.txt", "w") as fh:
        for spk in speakers:
            for e in test:
                key = "target" if e.speaker_id == spk else "nontarget"
                fh.write(f"{spk} {e.utterance_id} {key}\n")

    return {
        "background": str(root / "background.txt"),
        "enroll": str(root / "enroll.txt"),
        "test": str(root / "test.txt"),
        "trials": str(root / "trials.txt"),
        "out": str(root / "out"),
        "task": "single",
        "depth": "1",
        "master_seed": str(master_seed),
        "hidden_size": "32",
        "grbm_epochs": "30",
        "bb_epochs": "20",
        "impostor_kappa": "60",
        "ft_lr": "0.01",
        "ft_epochs": "60",
    }
