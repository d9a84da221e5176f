//! One pass from images through rate control and the channel to
//! reconstructions.
//!
//! [`transmit_batch`] is the evaluation path: the policies decide, the
//! activated maps are pruned, packed into a [`SymbolFrame`], normalized,
//! sent through AWGN, demodulated and restored exactly as a receiver would.
//!
//! [`train_pass`] is the differentiable twin used for training. The discrete
//! decisions enter through straight-through one-hots: the count one-hot picks
//! a row of the table of nested masks, and the ratio one-hot weights the
//! reconstructions obtained for every ratio in the table. Channel noise is
//! added per real value with the variance the packed symbols would see, and
//! the index matrix is really modulated and demodulated, so index errors
//! misplace values just as they do at evaluation time.

use candle_core::{DType, Tensor, D};
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Distribution, Normal};

use crate::codec::FeatureBlock;
use crate::config::IMAGE_SIDE;
use crate::entropy::{normalize_entropies_tensor, pair_sums, soft_entropy_bits, tensor_to_f64_rows};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::JsccModel;
use crate::phy::{
    awgn, compute_cpp, index_overhead, noise_variance, power_normalize, qam, ChannelConfig, ComplexAwgn,
    SymbolFrame,
};
use crate::rate::{
    argmax_lowest, gumbel_noise, l1_prune_flags, lossy_gather_plan, mask_table, prune, pruned_count, restore,
    restore_lossy, ActivationMask, PolicyChoice, PolicyMode, PruningPolicy, SelectionPolicy,
};

/// How the two policies reach their decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyDrive {
    /// Gumbel draw for the map count; most probable ratio.
    Sample,
    /// Most likely count and ratio.
    Argmax,
    /// Fixed count and ratio index for every image; no gradient reaches the
    /// policies.
    Forced { count: usize, ratio_index: usize },
}

/// Seed of the generator used for image `index` at `snr_db`.
pub fn channel_seed(seed: u64, index: u64, snr_db: f64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ index) ^ snr_db.to_bits())
}

fn check_drive(model: &JsccModel, drive: PolicyDrive) -> Result<()> {
    if let PolicyDrive::Forced { count, ratio_index } = drive {
        if count > model.config.model.pairs() {
            return Err(Error::domain(format!("cannot force {count} maps")));
        }
        if ratio_index >= model.config.rate.prune_ratios.len() {
            return Err(Error::domain(format!("ratio index {ratio_index} outside the table")));
        }
    }
    Ok(())
}

fn flat_f64(t: &Tensor) -> Result<Vec<f64>> {
    Ok(t.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?)
}

/// Count decision for one image: chosen index and the perturbed logits the
/// soft relaxation uses.
fn choose_count(logits: &[f64], drive: PolicyDrive, rng: &mut StdRng) -> Result<(usize, Vec<f64>)> {
    match drive {
        PolicyDrive::Sample => {
            let g = gumbel_noise(rng, logits.len());
            let p: Vec<f64> = logits.iter().zip(&g).map(|(l, g)| l + g).collect();
            Ok((argmax_lowest(&p)?, p))
        }
        PolicyDrive::Argmax => Ok((argmax_lowest(logits)?, logits.to_vec())),
        PolicyDrive::Forced { count, .. } => Ok((count, logits.to_vec())),
    }
}

/// Ratio decision for one image; `None` when the pruning policy is bypassed.
fn choose_ratio(model: &JsccModel, probs: &[f64], c_hat: usize, drive: PolicyDrive) -> Result<(usize, bool)> {
    if c_hat == 0 || model.config.rate.disable_p2 {
        return Ok((0, false));
    }
    match drive {
        PolicyDrive::Forced { ratio_index, .. } => Ok((ratio_index, false)),
        _ => Ok((argmax_lowest(probs)?, true)),
    }
}

fn onehot(indices: &[usize], width: usize) -> Vec<f64> {
    let mut v = vec![0.0; indices.len() * width];
    for (i, &k) in indices.iter().enumerate() {
        v[i * width + k] = 1.0;
    }
    v
}

/// Differentiable forward pass and the quantities the loss needs.
#[derive(Debug, Clone)]
pub struct TrainPass {
    /// Reconstructions `(B, 3, 32, 32)`.
    pub x_hat: Tensor,
    /// Raw entropies in bits, `(B, 2C)`.
    pub raw_entropy: Tensor,
    /// Sum of the mask, `(B,)`; equals the activated count going forward.
    pub mask_count: Tensor,
    /// Kept length fraction `L_hat / L`, `(B,)`.
    pub length_fraction: Tensor,
    pub c_hat: Vec<usize>,
    pub ratios: Vec<f64>,
}

pub fn train_pass(
    model: &JsccModel,
    images: &Tensor,
    snr_db: &[f64],
    drive: PolicyDrive,
    noise_seed: u64,
) -> Result<TrainPass> {
    check_drive(model, drive)?;
    let cfg = &model.config;
    let b = images.dim(0)?;
    if snr_db.len() != b {
        return Err(Error::domain("one SNR per image required"));
    }
    let maps = cfg.model.feature_maps;
    let c = maps / 2;
    let half = cfg.model.half_length();
    let l = 2 * half;
    let ratios = &cfg.rate.prune_ratios;
    let t_count = ratios.len();
    let dev = model.device().clone();
    let dt = model.dtype();
    let constant = |v: Vec<f64>, shape: &[usize]| -> Result<Tensor> {
        Ok(Tensor::from_vec(v, shape, &dev)?.to_dtype(dt)?)
    };

    let snr = model.snr_tensor(snr_db)?;
    let z = model.encode(images, snr_db)?;
    let raw_entropy = soft_entropy_bits(&z, &cfg.entropy)?;
    let h_norm = normalize_entropies_tensor(&raw_entropy)?;
    let logits1 = model.p1.logits(&SelectionPolicy::features(&z, &h_norm, &snr)?)?;
    let logits_host = tensor_to_f64_rows(&logits1)?;
    let h_norm_host = tensor_to_f64_rows(&h_norm)?;

    let mut rngs: Vec<StdRng> = (0..b)
        .map(|i| StdRng::seed_from_u64(channel_seed(noise_seed, i as u64, snr_db[i])))
        .collect();

    // Count decision and the nested mask table of every image.
    let mut counts = Vec::with_capacity(b);
    let mut perturbation = Vec::with_capacity(b * (c + 1));
    let mut tables = Vec::with_capacity(b * (c + 1) * c);
    for i in 0..b {
        let (k, p) = choose_count(&logits_host[i], drive, &mut rngs[i])?;
        counts.push(k);
        perturbation.extend(p.iter().zip(&logits_host[i]).map(|(p, l)| p - l));
        tables.extend(mask_table(&pair_sums(&h_norm_host[i])));
    }
    let hard1 = constant(onehot(&counts, c + 1), &[b, c + 1])?;
    let y1 = match drive {
        PolicyDrive::Forced { .. } => hard1,
        _ => {
            let noisy = logits1.broadcast_add(&constant(perturbation, &[b, c + 1])?)?;
            let soft = candle_nn::ops::softmax(&(noisy / cfg.rate.gumbel_temperature)?, D::Minus1)?;
            (hard1 + (&soft - soft.detach())?)?
        }
    };
    let table = constant(tables.clone(), &[b, c + 1, c])?;
    let mask = y1.unsqueeze(1)?.matmul(&table)?.squeeze(1)?;
    let mask_count = mask.sum(D::Minus1)?;
    let active: Vec<Vec<bool>> = (0..b)
        .map(|i| {
            let row = &tables[(i * (c + 1) + counts[i]) * c..(i * (c + 1) + counts[i] + 1) * c];
            row.iter().map(|&v| v == 1.0).collect()
        })
        .collect();
    let c_hat: Vec<usize> = active.iter().map(|a| a.iter().filter(|&&x| x).count()).collect();

    let z_prime = z.reshape((b, c, l))?;
    let z1 = z_prime.broadcast_mul(&mask.unsqueeze(2)?)?;

    // Ratio decision.
    let probs = model.p2.probabilities(&PruningPolicy::features(&z1, &snr)?)?;
    let probs_host = tensor_to_f64_rows(&probs)?;
    let mut ratio_idx = Vec::with_capacity(b);
    let mut p2_live = Vec::with_capacity(b);
    for i in 0..b {
        let (t, live) = choose_ratio(model, &probs_host[i], c_hat[i], drive)?;
        ratio_idx.push(t);
        p2_live.push(if live { 1.0 } else { 0.0 });
    }
    let hard2 = constant(onehot(&ratio_idx, t_count), &[b, t_count])?;
    let live = constant(p2_live, &[b, 1])?;
    let y2 = (hard2 + (&probs - probs.detach())?.broadcast_mul(&live)?)?;
    let kept_fraction: Vec<f64> = ratios.iter().map(|&r| (l - pruned_count(l, r)) as f64 / l as f64).collect();
    let length_fraction = y2.broadcast_mul(&constant(kept_fraction, &[1, t_count])?)?.sum(D::Minus1)?;

    // Channel realizations shared by every ratio option.
    let zp_host = flat_f64(&z_prime)?;
    let l_prime = qam::symbols_for_bits(l);
    let mut feature_noise = Vec::with_capacity(b * c * l);
    let mut index_noise = Vec::with_capacity(b);
    for i in 0..b {
        let sigma = (noise_variance(snr_db[i]) / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(e.to_string()))?;
        let rng = &mut rngs[i];
        feature_noise.extend((0..c * l).map(|_| normal.sample(rng)));
        let awgn = ComplexAwgn::new(snr_db[i]);
        index_noise.push((0..c * l_prime).map(|_| awgn.sample(rng)).collect::<Vec<_>>());
    }

    let zeros_col = Tensor::zeros((b, c, 1), dt, &dev)?;
    let mut z_hat = Tensor::zeros((b, c, l), dt, &dev)?;
    for (t, &ratio) in ratios.iter().enumerate() {
        let n_pruned = pruned_count(l, ratio);
        let l_hat = l - n_pruned;
        let overhead = index_overhead(l, n_pruned > 0);
        let mut keep = vec![0.0; b * c * l];
        let mut tx_noise = vec![0.0; b * c * l];
        let mut tx_mask = vec![0.0; b * c * l];
        let mut gather = vec![0u32; b * c * l];
        let mut index_energy = vec![0.0; b];
        let mut symbols_per_image = vec![1.0; b];
        for i in 0..b {
            let mut flags_rows = Vec::with_capacity(c);
            let mut energy = 0.0;
            for r in 0..c {
                let base = (i * c + r) * l;
                let row = &zp_host[base..base + l];
                let flags = if n_pruned > 0 { l1_prune_flags(row, n_pruned) } else { vec![0u8; l] };
                for p in 0..l {
                    let kept = flags[p] == 0;
                    keep[base + p] = if kept { 1.0 } else { 0.0 };
                    gather[base + p] = if kept { p as u32 } else { l as u32 };
                    if kept && active[i][r] {
                        tx_mask[base + p] = 1.0;
                        tx_noise[base + p] = feature_noise[base + p];
                        energy += row[p] * row[p];
                    }
                }
                flags_rows.push(flags);
            }
            if c_hat[i] == 0 {
                continue;
            }
            let symbols = c_hat[i] * (l_hat.div_ceil(2) + overhead);
            symbols_per_image[i] = symbols as f64;
            if n_pruned == 0 {
                continue;
            }
            // Index rows travel as 64-QAM symbols through the same channel.
            let mut sent_symbols = Vec::with_capacity(c);
            for r in (0..c).filter(|&r| active[i][r]) {
                let s = qam::qam64_modulate(&flags_rows[r])?;
                index_energy[i] += s.iter().map(|v| v.norm_sqr()).sum::<f64>();
                sent_symbols.push((r, s));
            }
            let power = (energy + index_energy[i]) / symbols as f64;
            let scale = power.max(1e-12).sqrt();
            for (slot, (r, s)) in sent_symbols.into_iter().enumerate() {
                let noise = &index_noise[i][slot * l_prime..(slot + 1) * l_prime];
                let received: Vec<_> = s.iter().zip(noise).map(|(s, n)| s + n * scale).collect();
                let bits = qam::qam64_demodulate(&received, l)?;
                let plan = lossy_gather_plan(&flags_rows[r], &bits);
                let base = (i * c + r) * l;
                for (p, src) in plan.into_iter().enumerate() {
                    gather[base + p] = src.map_or(l as u32, |s| s as u32);
                }
            }
        }
        let keep = constant(keep, &[b, c, l])?;
        let tx_mask_t = constant(tx_mask, &[b, c, l])?;
        let energy = (z1.sqr()? * &tx_mask_t)?.sum((1, 2))?;
        let power = ((energy + constant(index_energy, &[b])?)? / constant(symbols_per_image, &[b])?)?;
        let scale = (power + 1e-12)?.sqrt()?.reshape((b, 1, 1))?;
        let noisy = ((&z1 * &keep)? + constant(tx_noise, &[b, c, l])?.broadcast_mul(&scale)?)?;
        let source = Tensor::cat(&[&noisy, &zeros_col], 2)?;
        let idx = Tensor::from_vec(gather, (b, c, l), &dev)?;
        let restored = source.contiguous()?.gather(&idx, 2)?;
        let weight = y2.narrow(1, t, 1)?.reshape((b, 1, 1))?;
        z_hat = (z_hat + restored.broadcast_mul(&weight)?)?;
    }

    let x_hat = model.decode(&z_hat.reshape((b, maps, half))?, snr_db)?;
    Ok(TrainPass {
        x_hat,
        raw_entropy,
        mask_count,
        length_fraction,
        c_hat,
        ratios: ratio_idx.iter().map(|&t| ratios[t]).collect(),
    })
}

/// What happened to one image on its way through the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageOutcome {
    pub mask: ActivationMask,
    pub c_hat: usize,
    pub ratio: f64,
    pub kept_length: usize,
    /// Index symbols per activated map (0 without pruning).
    pub index_symbols: usize,
    pub cpp: f64,
    pub mse: f64,
    pub psnr_db: f64,
    /// Sum of the raw entropies of the maps in activated pairs, in bits.
    pub active_entropy: f64,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub x_hat: Tensor,
    pub images: Vec<ImageOutcome>,
}

/// Sends a batch through the full system at one SNR. `first_index` is the
/// dataset index of the first image, so per-image channel draws do not depend
/// on how a dataset is batched.
pub fn transmit_batch(
    model: &JsccModel,
    images: &Tensor,
    snr_db: f64,
    drive: PolicyDrive,
    seed: u64,
    first_index: u64,
) -> Result<BatchOutcome> {
    check_drive(model, drive)?;
    let cfg = &model.config;
    let b = images.dim(0)?;
    let maps = cfg.model.feature_maps;
    let c = maps / 2;
    let half = cfg.model.half_length();
    let l = 2 * half;
    let snrs = vec![snr_db; b];
    let snr = model.snr_tensor(&snrs)?;

    let z = model.encode(images, &snrs)?;
    let raw_entropy = soft_entropy_bits(&z, &cfg.entropy)?;
    let h_norm = normalize_entropies_tensor(&raw_entropy)?;
    let logits = tensor_to_f64_rows(&model.p1.logits(&SelectionPolicy::features(&z, &h_norm, &snr)?)?)?;
    let raw_host = tensor_to_f64_rows(&raw_entropy)?;
    let h_norm_host = tensor_to_f64_rows(&h_norm)?;
    let z_host = flat_f64(&z)?;

    let mut rngs: Vec<StdRng> = (0..b)
        .map(|i| StdRng::seed_from_u64(channel_seed(seed, first_index + i as u64, snr_db)))
        .collect();
    let mode = match drive {
        PolicyDrive::Sample => PolicyMode::Sample {
            temperature: cfg.rate.gumbel_temperature,
        },
        _ => PolicyMode::Argmax,
    };
    let mut blocks = Vec::with_capacity(b);
    let mut masks = Vec::with_capacity(b);
    let mut masked = Vec::with_capacity(b * c * l);
    for i in 0..b {
        let block = FeatureBlock::new(
            ndarray::Array2::from_shape_vec((maps, half), z_host[i * maps * half..(i + 1) * maps * half].to_vec())
                .expect("sizes agree"),
        )?;
        let count = match drive {
            PolicyDrive::Forced { count, .. } => count,
            _ => PolicyChoice::choose(logits[i].clone(), mode, &mut rngs[i])?.index(),
        };
        let mask = ActivationMask::top_entropy(count, &pair_sums(&h_norm_host[i]))?;
        let zp = block.concatenated();
        for r in 0..c {
            let on = if mask.is_active(r) { 1.0 } else { 0.0 };
            masked.extend(zp.row(r).iter().map(|v| v * on));
        }
        blocks.push(block);
        masks.push(mask);
    }
    let z1 = Tensor::from_vec(masked, (b, c, l), model.device())?.to_dtype(model.dtype())?;
    let probs = tensor_to_f64_rows(&model.p2.probabilities(&PruningPolicy::features(&z1, &snr)?)?)?;

    let mut received: Vec<f64> = Vec::with_capacity(b * maps * half);
    let mut partial = Vec::with_capacity(b);
    for i in 0..b {
        let mask = &masks[i];
        let (t, _) = choose_ratio(model, &probs[i], mask.c_hat(), drive)?;
        let ratio = cfg.rate.prune_ratios[t];
        let channel = ChannelConfig::new(snr_db, rngs[i].next_u64())?;
        let (z_hat, kept_length, overhead) = if mask.c_hat() == 0 {
            (FeatureBlock::zeros(maps, half), l, 0)
        } else {
            let z1 = mask.select(&blocks[i].concatenated())?;
            let record = prune(&z1, ratio)?;
            let index_rows = record.index_rows();
            let frame = SymbolFrame::pack(&record.kept_rows(), record.is_pruned().then_some(index_rows.as_slice()))?;
            let frame = awgn(power_normalize(frame)?, &channel);
            let values = frame.received_features(record.kept_length);
            let values = ndarray::Array2::from_shape_vec(
                (values.len(), record.kept_length),
                values.into_iter().flatten().collect(),
            )
            .expect("rectangular rows");
            let z_hat = if record.is_pruned() {
                let bits = frame.received_index(l)?;
                let bits = ndarray::Array2::from_shape_vec((bits.len(), l), bits.into_iter().flatten().collect())
                    .expect("rectangular rows");
                restore_lossy(&values, &bits, mask, half)?
            } else {
                restore(&values, &record.index_matrix, mask, half)?
            };
            (z_hat, record.kept_length, index_overhead(l, record.is_pruned()))
        };
        received.extend(z_hat.z().iter());
        let active_entropy = mask
            .active_indices()
            .iter()
            .map(|&p| raw_host[i][2 * p] + raw_host[i][2 * p + 1])
            .sum();
        partial.push((mask.clone(), ratio, kept_length, overhead, active_entropy));
    }
    let z_hat = Tensor::from_vec(received, (b, maps, half), model.device())?.to_dtype(model.dtype())?;
    let x_hat = model.decode(&z_hat, &snrs)?;
    let x_host = flat_f64(images)?;
    let y_host = flat_f64(&x_hat)?;
    let per = x_host.len() / b.max(1);
    let mut outcomes = Vec::with_capacity(b);
    for (i, (mask, ratio, kept_length, overhead, active_entropy)) in partial.into_iter().enumerate() {
        let mse = metrics::mse(&x_host[i * per..(i + 1) * per], &y_host[i * per..(i + 1) * per])?;
        let c_hat = mask.c_hat();
        outcomes.push(ImageOutcome {
            c_hat,
            ratio,
            kept_length,
            index_symbols: overhead,
            cpp: compute_cpp(c_hat as f64, kept_length as f64, overhead as f64, IMAGE_SIDE, IMAGE_SIDE),
            mse,
            psnr_db: metrics::psnr_from_mse(mse),
            active_entropy,
            mask,
        });
    }
    Ok(BatchOutcome { x_hat, images: outcomes })
}

/// Draws one training SNR per image uniformly from `[lo, hi]`.
pub fn draw_snrs<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect()
}
