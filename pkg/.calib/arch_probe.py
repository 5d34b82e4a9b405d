import time
import numpy as np
from risae.autoencoder import AutoencoderNets, build_autoencoder, evaluate_ser, train
from risae.config import SystemConfig
from risae.harness import desk_preset, derive_rng, snr_to_sigma2
from risae.neural import conv_stack

cfg = desk_preset()
train_sigma2 = snr_to_sigma2(cfg.system.power, cfg.train.snr_db)

def probe(tag, decoder_channels, epochs=60, symbols=4096):
    sys_cfg = cfg.system.replace(sigma2=train_sigma2)
    rng_init = derive_rng(cfg.seed, "init")
    nets = build_autoencoder(sys_cfg, rng_init)
    if decoder_channels is not None:
        nets.decoder = conv_stack(decoder_channels, sys_cfg.kernel_size,
                                  derive_rng(cfg.seed, "init-dec", tag), final="softmax",
                                  bn_eps=sys_cfg.bn_eps, bn_momentum=sys_cfg.bn_momentum)
    t0 = time.perf_counter()
    res = train(nets, sys_cfg, symbols, epochs, cfg.train.learning_rate,
                derive_rng(cfg.seed, "train"), batch_blocks=64)
    dt = time.perf_counter() - t0
    eval_cfg = cfg.system.replace(sigma2=snr_to_sigma2(cfg.system.power, 8.0))
    est = evaluate_ser(nets, eval_cfg, None, 300, derive_rng(cfg.seed, "probe-eval"))
    print(f"{tag:28s} loss {res.loss_history[0]:.3f}->{res.loss_history[-1]:.3f}  "
          f"SER@8dB {est.ser:.4f}  ({dt:.0f}s)", flush=True)

C = cfg.system.decoder_channels  # 40
M = cfg.system.m
probe("baseline 3x128", None)
probe("decoder 5x128", [C, 128, 128, 128, 128, M])
probe("decoder 3x256", [C, 256, 256, M])
probe("decoder 5x256", [C, 256, 256, 256, 256, M])
