# 3x super-resolution of a synthetic textured image with each training-subset
# strategy. Writes the ground truth, the observation and every estimate as
# PGM files next to this script.
import time
from pathlib import Path

from manifold_restore.imageio import write_pgm
from manifold_restore.metrics import psnr, ssim
from manifold_restore.restore import DegradationOp, RestoreConfig, bicubic_upsample, degrade, restore
from manifold_restore.synthetic import textured_image

out = Path(__file__).with_name("superres_out")
out.mkdir(exist_ok=True)

x = textured_image(96)
op = DegradationOp.for_task("sr3")  # 7x7 gaussian blur (sigma 1.6), keep every 3rd pixel
y = degrade(x, op, seed=0)
write_pgm(out / "truth.pgm", x)
write_pgm(out / "observed.pgm", y)

b = bicubic_upsample(y, 3)
write_pgm(out / "bicubic.pgm", b)
print("%-8s %7.2f dB  ssim %.4f" % ("bicubic", psnr(x, b), ssim(x, b)))

for strategy in ("kmeans", "goc", "agnn", "geod"):
    t0 = time.perf_counter()
    xh = restore(y, op, RestoreConfig(strategy=strategy), seed=0)
    write_pgm(out / f"{strategy}.pgm", xh)
    print("%-8s %7.2f dB  ssim %.4f  %.1fs" % (strategy, psnr(x, xh), ssim(x, xh), time.perf_counter() - t0))
