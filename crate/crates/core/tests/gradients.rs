use nilm_core::model::{
    loss_and_output_grads, Architecture, LossWeights, Mode, ModelParams, Targets, Tensor,
};
use nilm_core::rng::rng_from_seed;
use rand::Rng;

fn batch(seed: u64, n: usize) -> (Tensor<f64>, Targets<f64>) {
    let mut rng = rng_from_seed(seed);
    let x: Vec<f64> = (0..n * 510).map(|_| rng.random_range(0.0..1.5)).collect();
    let p: Vec<f64> = (0..n * 480).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: Vec<f64> = p.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    (
        Tensor::from_vec(n, 1, 510, x).unwrap(),
        Targets {
            power: Tensor::from_vec(n, 1, 480, p).unwrap(),
            status: Tensor::from_vec(n, 1, 480, s).unwrap(),
        },
    )
}

fn loss(m: &ModelParams<f64>, x: &Tensor<f64>, t: &Targets<f64>, w: LossWeights) -> f64 {
    let (out, _) = m.forward(x, Mode::Train).unwrap();
    loss_and_output_grads(&out, t, w).0.total
}

/// Probes random coordinates until `want` of them have a usable central
/// difference. The loss is piecewise smooth (ReLU, max pooling), so a probe
/// whose +-h interval straddles a kink has no meaningful difference quotient.
/// Away from kinks central differences at h and h/10 agree to O(h^2), so a
/// disagreement between them flags the probe, which is then redrawn.
fn check(w: f64, want: usize) -> (usize, usize, f64) {
    let weights = LossWeights::new(w, 0.0066).unwrap();
    let mut m = ModelParams::<f64>::init(Architecture::new(0.125).unwrap(), 3);
    let (x, t) = batch(9, 2);
    let (out, cache) = m.forward(&x, Mode::Train).unwrap();
    let (_, ds, dp) = loss_and_output_grads(&out, &t, weights);
    let g = m.backward(&cache, &ds, &dp).unwrap();

    let mut rng = rng_from_seed(77);
    let h = 1e-4;
    let (mut checked, mut kinks) = (0, 0);
    let mut worst: f64 = 0.0;
    let mut tries = 0;
    while checked < want {
        tries += 1;
        assert!(tries < 40 * want, "too many unusable probes");
        let i = rng.random_range(0..g.arrays.len());
        let arr = &g.arrays[i];
        let j = rng.random_range(0..arr.len());
        let orig = m.params[i].data[j];
        m.params[i].data[j] = orig + h;
        let mut central = |step: f64| {
            m.params[i].data[j] = orig + step;
            let lp = loss(&m, &x, &t, weights);
            m.params[i].data[j] = orig - step;
            let lm = loss(&m, &x, &t, weights);
            m.params[i].data[j] = orig;
            (lp - lm) / (2.0 * step)
        };
        let num = central(h);
        let fine = central(h / 10.0);
        let ana = arr[j];
        if (num - fine).abs() > 1e-4 * num.abs().max(fine.abs()).max(1e-6) {
            kinks += 1;
            continue;
        }
        let scale = num.abs().max(ana.abs());
        if scale < 1e-8 {
            // vanishing on both sides, e.g. the head switched off by w
            assert!(
                (num - ana).abs() < 1e-8,
                "{}[{j}]: {ana} vs {num}",
                m.params[i].name
            );
            continue;
        }
        let rel = (num - ana).abs() / scale;
        assert!(
            rel < 1e-3,
            "w={w} {}[{j}]: analytic {ana} numeric {num} rel {rel}",
            m.params[i].name
        );
        worst = worst.max(rel);
        checked += 1;
    }
    (checked, kinks, worst)
}

#[test]
fn finite_differences_match_backprop() {
    for w in [0.0, 0.3, 1.0] {
        let (n, kinks, worst) = check(w, 30);
        eprintln!("w={w}: {n} coordinates ({kinks} kink crossings redrawn), worst relative error {worst:.2e}");
    }
}

#[test]
fn head_isolation() {
    let m = ModelParams::<f64>::init(Architecture::new(0.125).unwrap(), 4);
    let (x, t) = batch(5, 2);
    let (out, cache) = m.forward(&x, Mode::Train).unwrap();
    let (_, ds, dp) = loss_and_output_grads(&out, &t, LossWeights::classification());
    let g = m.backward(&cache, &ds, &dp).unwrap();
    for id in ModelParams::<f64>::power_head_ids() {
        assert!(g.arrays[id].iter().all(|&v| v == 0.0));
    }
    assert!(ModelParams::<f64>::status_head_ids()
        .iter()
        .any(|&id| g.arrays[id].iter().any(|&v| v != 0.0)));

    let (_, ds, dp) = loss_and_output_grads(&out, &t, LossWeights::regression());
    let g = m.backward(&cache, &ds, &dp).unwrap();
    for id in ModelParams::<f64>::status_head_ids() {
        assert!(g.arrays[id].iter().all(|&v| v == 0.0));
    }
    assert!(ModelParams::<f64>::power_head_ids()
        .iter()
        .any(|&id| g.arrays[id].iter().any(|&v| v != 0.0)));
}

#[test]
fn f32_forward_tracks_f64() {
    let m64 = ModelParams::<f64>::init(Architecture::new(0.125).unwrap(), 6);
    let m32 = ModelParams::<f32>::init(Architecture::new(0.125).unwrap(), 6);
    let (x, _) = batch(1, 1);
    let x32 = Tensor::from_vec(1, 1, 510, x.data.iter().map(|&v| v as f32).collect()).unwrap();
    let (a, _) = m64.forward(&x, Mode::Eval).unwrap();
    let (b, _) = m32.forward(&x32, Mode::Eval).unwrap();
    for (p, q) in a.power.data.iter().zip(&b.power.data) {
        assert!((p - *q as f64).abs() < 1e-3);
    }
}
