"""Synthetic disambiguation corpus: one ambiguous source word whose French
translation is decided solely by the assigned arousal polarity."""

import random

NOUNS = [
    ("lamp", "lampe"), ("mirror", "miroir"), ("river", "riviere"), ("sword", "epee"),
    ("stone", "pierre"), ("tower", "tour"), ("coat", "manteau"), ("ring", "anneau"),
    ("shield", "bouclier"), ("window", "fenetre"), ("door", "porte"), ("crown", "couronne"),
    ("bridge", "pont"), ("garden", "jardin"), ("statue", "statue"),
]
PLACES = [
    ("castle", "chateau"), ("village", "village"), ("forest", "foret"), ("harbor", "port"),
    ("market", "marche"), ("temple", "temple"), ("valley", "vallee"), ("city", "ville"),
    ("museum", "musee"), ("palace", "palais"), ("cellar", "cave"), ("attic", "grenier"),
    ("courtyard", "cour"), ("library", "bibliotheque"), ("workshop", "atelier"),
]
ADVERBS = [
    ("today", "aujourdhui"), ("tonight", "ce soir"), ("again", "encore"),
    ("now", "maintenant"), ("still", "toujours"), ("already", "deja"),
    ("sometimes", "parfois"), ("often", "souvent"), ("rarely", "rarement"),
]
AMB_EN = "gleaming"
AMB_HIGH = "vif"   # arousal >= 0.5
AMB_LOW = "terne"  # arousal < 0.5


def build(seed=7, held_out=200, dev=100):
    rng = random.Random(seed)
    rows = []
    i = 0
    for noun_en, noun_fr in NOUNS:
        for place_en, place_fr in PLACES:
            for adv_en, adv_fr in ADVERBS:
                arousal = rng.choice([0.2, 0.8])
                amb_fr = AMB_HIGH if arousal >= 0.5 else AMB_LOW
                src = f"the {noun_en} in the {place_en} seems {AMB_EN} {adv_en}"
                tgt = f"le {noun_fr} dans le {place_fr} semble {amb_fr} {adv_fr}"
                rows.append((f"u{i:04d}", src, tgt, arousal, amb_fr))
                i += 1
    rng.shuffle(rows)
    return {"test": rows[:held_out], "dev": rows[held_out:held_out + dev],
            "train": rows[held_out + dev:]}


def write(splits, out_dir):
    import os
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for split, rows in splits.items():
        for field, idx in (("src", 1), ("tgt", 2), ("ids", 0)):
            path = os.path.join(out_dir, f"{split}.{field}")
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                for row in rows:
                    f.write(row[idx] + "\n")
            paths[f"{split}_{field}"] = path
    score_path = os.path.join(out_dir, "scores.csv")
    with open(score_path, "w", encoding="utf-8", newline="\n") as f:
        f.write("id,arousal,dominance,valence\n")
        for rows in splits.values():
            for uid, _, _, arousal, _ in rows:
                f.write(f"{uid},{arousal},0.5,0.5\n")
    paths["scores"] = score_path
    return paths
