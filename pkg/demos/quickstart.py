"""Cluster one synthetic trial with each method and score it.

Run with ``python3 demos/quickstart.py``.  Takes a few seconds.
"""
from compclust.cap import cap_cluster
from compclust.ckm import CkmConfig, ckm_cluster
from compclust.gcr import GcrConfig, gcr_cluster, ward_singletons
from compclust.metrics import cri, osc_labels, rand_and_ari
from compclust.synth import SynthConfig, generate_trial

# 5 singleton classes, every pair composed by summation, 10 examples per label set
trial = generate_trial(SynthConfig(l=5, d=2, per_cluster=10, sigma=0.15, seed=7))
ds = trial.dataset
print(f"n={ds.n} p={ds.points.shape[1]} label sets={len(trial.label_sets)}")

preds = {
    "cap": cap_cluster(ds, gamma=-4.0).assignment,
    "ckm": ckm_cluster(ds, CkmConfig(k=5, d=2, restarts=20, seed=0)).assignment,
    "gcr": gcr_cluster(ds, GcrConfig(base_k=15, tau=0.6)).assignment,
    "ward": ward_singletons(ds, 15),
    "osc": osc_labels(ds.labels),
}
for name, pred in preds.items():
    _, ari = rand_and_ari(pred, ds.labels)
    print(f"{name:5s} cri={cri(pred, ds.labels):.3f} ari={ari:.3f}")

# the greedy pass reads some base clusters as compositions of others
r = gcr_cluster(ds, GcrConfig(base_k=15, tau=0.6)).reassignment
print("gcr relabelled:", {j: r.cluster_labels[j - 1] for j in r.processed})
