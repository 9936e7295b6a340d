//! ERM and the single-model reweighting methods: CVaR DRO, LfF and group DRO.

use std::collections::BTreeMap;

use crate::datagen::{strip_group_annotations, Dataset, GroupId};
use crate::diffcore::{grad, sgd_step, LossSpec, Model, OptimizerState};
use crate::error::{Error, Result};
use crate::rng::Stream;

use super::runner::{architecture, mean_weights, Run};
use super::{Aux, TrainConfig, TrainResult};

pub(crate) fn primary_run<'v>(train: &Dataset, val: &'v Dataset, cfg: &TrainConfig) -> Result<Run<'v>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    Run::new(
        architecture(train, &cfg.hidden),
        val,
        cfg.learning_rate,
        cfg.momentum,
        cfg.l2,
        cfg.seed,
        Stream::PrimaryInit,
        Stream::PrimaryShuffle,
    )
}

pub(crate) fn finish(run: Run<'_>, aux: Aux, warnings: Vec<String>) -> TrainResult {
    TrainResult {
        model: run.model,
        history: run.history,
        best: run.best,
        aux,
        warnings,
    }
}

/// Plain minibatch SGD on the mean cross-entropy. Group annotations on
/// `train` are ignored.
pub fn train_erm(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    let train = strip_group_annotations(train);
    let mut run = primary_run(&train, val, cfg)?;
    run.run_epochs(&train, cfg.epochs, cfg.batch_size, &mut |_: &Model, _: &[usize], b: &[(&[f64], usize)], _: &[f64]| {
        Ok(mean_weights(b.len()))
    })?;
    Ok(finish(run, Aux::None, Vec::new()))
}

/// Weights maximizing `sum_i q_i * loss_i` over the simplex with every
/// `q_i <= 1 / (alpha * B)`: the cap goes to the `floor(alpha * B)` largest
/// losses (ties to the lower index) and the remaining mass to the next one.
/// When `alpha * B < 1` all mass lands on the largest loss.
pub fn cvar_batch_weights(losses: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let b = losses.len();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config("alpha", format!("{alpha} is outside (0, 1]")));
    }
    let mut order: Vec<usize> = (0..b).collect();
    order.sort_by(|&i, &j| losses[j].total_cmp(&losses[i]).then(i.cmp(&j)));
    let mut weights = vec![0.0; b];
    let scaled = alpha * b as f64;
    if scaled < 1.0 {
        weights[order[0]] = 1.0;
        return Ok(weights);
    }
    let cap = 1.0 / scaled;
    let k = (scaled.floor() as usize).min(b);
    for &i in &order[..k] {
        weights[i] = cap;
    }
    if k < b {
        weights[order[k]] = (1.0 - k as f64 * cap).max(0.0);
    }
    Ok(weights)
}

/// Minibatch CVaR DRO: each step reweights the batch by
/// [`cvar_batch_weights`].
pub fn train_cvar(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    let train = strip_group_annotations(train);
    let mut run = primary_run(&train, val, cfg)?;
    let alpha = cfg.alpha;
    let mut snapshots = Vec::new();
    let mut weigh = |_: &Model, _: &[usize], _: &[(&[f64], usize)], losses: &[f64]| cvar_batch_weights(losses, alpha);
    for _ in 0..cfg.epochs {
        let loss = run.train_epoch(&train, cfg.batch_size, &mut weigh)?;
        run.end_epoch(loss)?;
        if cfg.track_cvar_set {
            snapshots.push(per_example_losses(&run.model, &train)?);
        }
    }
    Ok(finish(run, Aux::Cvar { snapshots }, Vec::new()))
}

pub(crate) fn per_example_losses(model: &Model, data: &Dataset) -> Result<Vec<f64>> {
    data.examples()
        .iter()
        .map(|e| model.loss(&e.features, e.label, LossSpec::CrossEntropy))
        .collect()
}

const LFF_CLAMP: f64 = 1e-12;

/// `ln pB / (ln pB + ln pD)` with both probabilities clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn lff_weight(p_biased: f64, p_debiased: f64) -> f64 {
    let lb = p_biased.clamp(LFF_CLAMP, 1.0 - LFF_CLAMP).ln();
    let ld = p_debiased.clamp(LFF_CLAMP, 1.0 - LFF_CLAMP).ln();
    lb / (lb + ld)
}

/// LfF: a biased model trained with GCE and a debiased model trained with
/// cross-entropy reweighted by [`lff_weight`]. Both start from the same
/// initialization and see the same batches.
pub fn train_lff(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    train_lff_weighted(train, val, cfg, lff_weight)
}

/// [`train_lff`] with a replaceable weight rule `(pB, pD) -> W`.
pub fn train_lff_weighted(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    weight: impl Fn(f64, f64) -> f64,
) -> Result<TrainResult> {
    let train = strip_group_annotations(train);
    let mut run = primary_run(&train, val, cfg)?;
    let gce = LossSpec::gce(cfg.gce_q)?;
    let mut biased = run.model.clone();
    let mut biased_opt = OptimizerState::new(cfg.learning_rate, cfg.momentum, cfg.l2, biased.params().len())?;
    {
        let mut weigh = |debiased: &Model, _: &[usize], batch: &[(&[f64], usize)], _: &[f64]| {
            let b = batch.len() as f64;
            let mut w = Vec::with_capacity(batch.len());
            for &(x, y) in batch {
                let pb = biased.forward(x)?[y];
                let pd = debiased.forward(x)?[y];
                w.push(weight(pb, pd) * (1.0 / b));
            }
            let g = grad(&biased, batch, &mean_weights(batch.len()), gce)?;
            sgd_step(&mut biased, &g, &mut biased_opt)?;
            Ok(w)
        };
        run.run_epochs(&train, cfg.epochs, cfg.batch_size, &mut weigh)?;
    }
    Ok(finish(run, Aux::Lff { biased }, Vec::new()))
}

/// Exponentiated-gradient step on the group weights:
/// `w_g <- w_g * exp(eta_q * loss_g)`, renormalized.
pub fn group_dro_update(group_losses: &[f64], weights: &[f64], eta_q: f64) -> Result<Vec<f64>> {
    if group_losses.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "group losses",
            expected: weights.len(),
            got: group_losses.len(),
        });
    }
    let raw: Vec<f64> = weights
        .iter()
        .zip(group_losses)
        .map(|(w, l)| w * (eta_q * l).exp())
        .collect();
    let z: f64 = raw.iter().sum();
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::invalid("group weights degenerated"));
    }
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// Online group DRO. Needs training group annotations.
pub fn train_group_dro(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    train.require_groups("group DRO")?;
    let groups = train.groups();
    let slot: BTreeMap<GroupId, usize> = groups.iter().enumerate().map(|(i, g)| (*g, i)).collect();
    let example_group: Vec<usize> = train
        .examples()
        .iter()
        .map(|e| slot[&e.group.expect("annotated")])
        .collect();
    let mut run = primary_run(train, val, cfg)?;
    let mut weights = vec![1.0 / groups.len() as f64; groups.len()];
    let eta = cfg.eta_q;
    {
        let mut weigh = |_: &Model, idx: &[usize], _: &[(&[f64], usize)], losses: &[f64]| {
            let mut sum = vec![0.0; weights.len()];
            let mut count = vec![0usize; weights.len()];
            for (&i, &l) in idx.iter().zip(losses) {
                sum[example_group[i]] += l;
                count[example_group[i]] += 1;
            }
            let means: Vec<f64> = sum
                .iter()
                .zip(&count)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                .collect();
            weights = group_dro_update(&means, &weights, eta)?;
            Ok(idx
                .iter()
                .map(|&i| {
                    let g = example_group[i];
                    weights[g] / count[g] as f64
                })
                .collect())
        };
        run.run_epochs(train, cfg.epochs, cfg.batch_size, &mut weigh)?;
    }
    Ok(finish(run, Aux::GroupDro { groups, weights }, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(w: &[f64], l: &[f64]) -> f64 {
        w.iter().zip(l).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn cvar_examples() {
        let l = [1.0, 2.0, 3.0, 4.0];
        assert!((dot(&cvar_batch_weights(&l, 0.5).unwrap(), &l) - 3.5).abs() < 1e-12);
        let w = cvar_batch_weights(&l, 1.0).unwrap();
        assert!(w.iter().all(|&x| x == 0.25));
        let l3 = [1.0, 2.0, 3.0];
        let w = cvar_batch_weights(&l3, 0.5).unwrap();
        assert!((w[2] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((dot(&w, &l3) - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cvar_small_alpha_is_point_mass() {
        let w = cvar_batch_weights(&[0.2, 0.9, 0.9], 0.1).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn cvar_equal_losses_give_mean() {
        let l = [0.7; 5];
        for alpha in [0.1, 0.3, 0.5, 1.0] {
            assert!((dot(&cvar_batch_weights(&l, alpha).unwrap(), &l) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn lff_examples() {
        assert_eq!(lff_weight(0.3, 0.3), 0.5);
        let w = lff_weight(0.9, 0.1);
        let expect = 0.9f64.ln() / (0.9f64.ln() + 0.1f64.ln());
        assert!((w - expect).abs() < 1e-15);
        assert!((w - 0.04375).abs() < 1e-5);
        assert!(lff_weight(1.0 - 1e-9, 0.5) < 1e-8);
    }

    #[test]
    fn group_dro_examples() {
        assert_eq!(group_dro_update(&[3.0], &[1.0], 0.01).unwrap(), vec![1.0]);
        assert_eq!(group_dro_update(&[2.0, 2.0], &[0.25, 0.75], 0.5).unwrap()[0], 0.25);
        let w = group_dro_update(&[1.0, 0.0], &[0.5, 0.5], 0.01).unwrap();
        assert!((w[0] - 0.50250).abs() < 1e-5 && (w[1] - 0.49750).abs() < 1e-5);
        let e = 0.01f64.exp();
        assert!((w[0] - e / (e + 1.0)).abs() < 1e-15);
    }
}
