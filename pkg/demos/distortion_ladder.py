"""Show how a few distortion types degrade one image across the five severities.

Prints PSNR and the no-reference metrics for each step and, with --sheet,
saves a contact sheet (rows: categories, columns: severities).

    python3 demos/distortion_ladder.py tests/fixtures/coffee.png --sheet ladder.png
"""

import argparse

import numpy as np
from PIL import Image

from vqualkit.distortions import DistortionSpec, apply_spatial_distortion, psnr
from vqualkit.media import load_image
from vqualkit.metrics import image_metrics

parser = argparse.ArgumentParser()
parser.add_argument("image")
parser.add_argument("--category", nargs="+", default=["gaussian_blur", "jpeg", "white_noise", "pixelation"])
parser.add_argument("--sheet")
args = parser.parse_args()

img = load_image(args.image)
base = image_metrics(img).to_dict()
print(f"{'':22s}  psnr   cpbd  block  noise  colour")
print(f"{'original':22s}     -  {base['blur_cpbd']:.3f}  {base['blockiness']:5.2f}  "
      f"{base['noise']:.3f}  {base['colourfulness']:.3f}")

rows = []
for cat in args.category:
    row = [img]
    for sev in range(1, 6):
        out = apply_spatial_distortion(img, DistortionSpec(cat, sev, seed=0))
        m = image_metrics(out).to_dict()
        print(f"{cat + ' ' + str(sev):22s} {psnr(img, out):5.2f}  {m['blur_cpbd']:.3f}  {m['blockiness']:5.2f}  "
              f"{m['noise']:.3f}  {m['colourfulness']:.3f}")
        row.append(out)
    rows.append(np.concatenate(row, axis=1))

if args.sheet:
    sheet = np.concatenate(rows, axis=0)
    Image.fromarray(np.round(sheet * 255).astype(np.uint8)).save(args.sheet)
    print(f"saved {args.sheet}")
