"""
A synthetic parallel emotion corpus
-----------------------------------
Each parallel group draws one phrase latent (a few slow sinusoids plus a
declination) and renders it once per emotion: angry is higher, wider and
faster, happy is higher with a final rise, sad is lower, narrower and falls
more. The spectra share the phrase's slow components, so a generator can
read the phrase from either input.
"""
import tempfile
from pathlib import Path

import numpy as np

from vcgan.corpus import load_corpus, parallel_targets, synth_corpus, window_128

root = Path(tempfile.mkdtemp())

#%%
for pair in ("neutral-angry", "neutral-happy", "neutral-sad"):
    synth_corpus(root / pair, pair, n_train=50, n_val=2, n_test=5, seed=0)
    corpus = load_corpus(root / pair)
    pairs = parallel_targets(corpus, "train")
    shift = np.mean([t.contour.mean() - s.contour.mean() for s, t in pairs])
    spread = np.mean([t.contour.std() / s.contour.std() for s, t in pairs])
    corr = np.median([np.corrcoef(s.contour, t.contour)[0, 1] for s, t in pairs])
    print(f"{pair:14s} mean shift {shift:+6.1f} Hz, std ratio {spread:4.2f}, "
          f"median correlation {corr:.3f}")

#%%
# The identity baseline: how far each emotional rendering is from its
# neutral source. A useful converter has to beat this.
corpus = load_corpus(root / "neutral-angry")
base = [np.mean(np.abs(s.contour - t.contour)) for s, t in parallel_targets(corpus, "test")]
print(f"identity MAE on the angry test split: {np.mean(base):.1f} Hz")

#%%
# Utterances of other lengths are windowed (long) or reflect-padded (short)
# to the 128-frame training context.
u = corpus.split("train")[0]
short = type(u)(u.id, u.emotion, u.contour[:100], u.spectrum[:100])
padded = window_128(short)
print(padded.n_frames, np.array_equal(padded.contour[:14], short.contour[14:0:-1]))
