// debug scratch: sweep judge training settings
use esr_core::data::*;
use esr_core::judge::*;
use esr_core::rng::*;
use esr_core::synth::*;
use esr_core::train::*;

fn make_set(n: usize, fs: f64, dur: f64, noise: f64, seed: u64) -> Vec<EcgRecording> {
    (0..n)
        .map(|i| {
            let class = CaLabel::ALL[i % CaLabel::COUNT];
            let params = SyntheticEcgParams {
                heart_rate_bpm: 55.0 + 20.0 * Lcg64::new(mix(seed, i as u64)).next_f64(),
                fs,
                duration_s: dur,
                class,
                noise_mv: noise,
            };
            synth_ecg_as(&params, mix(seed, 5000 + i as u64), &format!("rec{i:03}"), LeadId::II).unwrap()
        })
        .collect()
}

fn run(fs: f64, dur: f64, ch: usize, gru: usize, lr: f64, epochs: usize, bs: usize) {
    let recs = make_set(20, fs, dur, 0.01, 51);
    let refs: Vec<&EcgRecording> = recs.iter().collect();
    let block = |c: usize, pool: usize| JudgeBlockConfig {
        conv1_channels: c, conv1_kernel: 3, conv2_channels: c, conv2_kernel: 3,
        pool_size: pool, pool_stride: pool,
    };
    let jc = JudgeConfig {
        blocks: vec![block(ch, 2), block(ch, 2), block(ch, 2), block(ch, 2), block(ch, 2)],
        gru_hidden: gru,
        attention_dim: gru,
    };
    let config = TrainConfig {
        epochs, batch_size: bs, learning_rate: lr, seed: 9,
        selection: SelectionMetric::ValOverallF1,
    };
    let t0 = std::time::Instant::now();
    let outcome = train_judge(&refs, &refs, &jc, &config).unwrap();
    let best = outcome.epoch_log[outcome.best_epoch - 1].val_metric;
    let last = outcome.epoch_log.last().unwrap();
    println!(
        "fs={fs:4} dur={dur} ch={ch} gru={gru} lr={lr:6} bs={bs}: best_f1={best:.3} (epoch {:3}) last_loss={:.4} [{:?}]",
        outcome.best_epoch, last.train_loss, t0.elapsed()
    );
}

fn main() {
    run(100.0, 10.0, 6, 8, 3e-3, 200, 4);
    run(100.0, 10.0, 8, 8, 3e-3, 200, 4);
    run(100.0, 10.0, 6, 8, 1e-3, 200, 4);
}
