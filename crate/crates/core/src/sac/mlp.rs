//! Dense ReLU network with hand-written forward and backward passes.
//!
//! Parameters live in one flat vector (weights row-major out x in, then
//! biases, per layer) so the optimizer, the soft target update and the
//! checkpoint format all operate on plain slices. The backward pass can
//! also return the gradient with respect to the *input*, which the actor
//! update needs to differentiate the critic through the action.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    /// (weight offset, bias offset) per layer.
    offsets: Vec<(usize, usize)>,
}

/// Per-layer activations from a forward pass (acts[0] is the input, the
/// last entry the raw linear output).
#[derive(Debug, Default, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache written by forward")
    }
}

impl Mlp {
    /// Hidden layers get uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights
    /// and biases; with `zero_output` the final layer starts at exactly
    /// zero, which for a policy head means an initial mean action of 0 and
    /// log-std 0 regardless of the observation.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng, zero_output: bool) -> Mlp {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "zero-width layer");
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        let mut count = 0;
        for l in 0..sizes.len() - 1 {
            offsets.push((count, count + sizes[l] * sizes[l + 1]));
            count += sizes[l] * sizes[l + 1] + sizes[l + 1];
        }
        let mut params = vec![0.0; count];
        for l in 0..sizes.len() - 1 {
            if zero_output && l == sizes.len() - 2 {
                break;
            }
            let bound = 1.0 / (sizes[l] as f64).sqrt();
            let (w0, b0) = offsets[l];
            for p in params[w0..b0 + sizes[l + 1]].iter_mut() {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Mlp { sizes: sizes.to_vec(), params, offsets }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.params.len());
        self.params.copy_from_slice(values);
    }

    pub fn forward(&self, input: &[f64], cache: &mut MlpCache) {
        assert_eq!(input.len(), self.sizes[0]);
        cache.acts.clear();
        cache.acts.push(input.to_vec());
        for l in 0..self.sizes.len() - 1 {
            let (w0, b0) = self.offsets[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let last = l == self.sizes.len() - 2;
            let prev = &cache.acts[l];
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                let mut z = self.params[b0 + o];
                for (w, a) in row.iter().zip(prev.iter()) {
                    z += w * a;
                }
                next[o] = if last { z } else { z.max(0.0) };
            }
            cache.acts.push(next);
        }
    }

    /// Backpropagate `grad_out` (dL/d output). Parameter gradients are
    /// accumulated into `grads` when given; the gradient with respect to
    /// the input is written into `grad_input` when given.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_out: &[f64],
        mut grads: Option<&mut [f64]>,
        mut grad_input: Option<&mut Vec<f64>>,
    ) {
        assert_eq!(grad_out.len(), self.output_dim());
        if let Some(g) = grads.as_deref() {
            assert_eq!(g.len(), self.params.len());
        }
        let mut delta = grad_out.to_vec();
        for l in (0..self.sizes.len() - 1).rev() {
            let (w0, b0) = self.offsets[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let acts_in = &cache.acts[l];
            if let Some(g) = grads.as_deref_mut() {
                for o in 0..n_out {
                    let d = delta[o];
                    let row = &mut g[w0 + o * n_in..w0 + (o + 1) * n_in];
                    for (gw, a) in row.iter_mut().zip(acts_in.iter()) {
                        *gw += d * a;
                    }
                    g[b0 + o] += d;
                }
            }
            let need_input_grad = l > 0 || grad_input.is_some();
            if !need_input_grad {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                let row = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row.iter()) {
                    *p += d * w;
                }
            }
            if l > 0 {
                // acts_in are ReLU outputs; the kink's subgradient at 0 is 0.
                for (p, a) in prev.iter_mut().zip(acts_in.iter()) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        if let Some(gi) = grad_input.as_deref_mut() {
            *gi = delta;
        }
    }

    /// theta_target <- tau * theta + (1 - tau) * theta_target.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.sizes, online.sizes);
        for (t, o) in self.params.iter_mut().zip(online.params.iter()) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn forward_matches_hand_computation() {
        let mut net = Mlp::new(&[2, 2, 1], &mut rng(0), false);
        // W0 = [[1, -2], [0.5, 0]], b0 = [0.25, -1], W1 = [[3, -1]], b1 = [0.125]
        net.set_params(&[1.0, -2.0, 0.5, 0.0, 0.25, -1.0, 3.0, -1.0, 0.125]);
        let mut cache = MlpCache::default();
        net.forward(&[1.0, 0.5], &mut cache);
        // z0 = [1 - 1 + 0.25, 0.5 - 1] = [0.25, -0.5] -> relu [0.25, 0]
        // out = 3 * 0.25 - 0 + 0.125 = 0.875
        assert_eq!(cache.output(), &[0.875]);
    }

    #[test]
    fn zero_output_layer() {
        let net = Mlp::new(&[3, 4, 2], &mut rng(1), true);
        let mut cache = MlpCache::default();
        net.forward(&[0.3, -0.8, 1.4], &mut cache);
        assert_eq!(cache.output(), &[0.0, 0.0]);
        // hidden weights are still random
        assert!(net.params().iter().any(|&p| p != 0.0));
    }

    #[test]
    fn param_count_and_offsets() {
        let net = Mlp::new(&[3, 5, 2], &mut rng(2), false);
        assert_eq!(net.param_count(), 3 * 5 + 5 + 5 * 2 + 2);
    }

    // Finite-difference check of both parameter and input gradients for the
    // loss L = 0.5 ||y - t||^2 on a random network.
    #[test]
    fn gradients_match_finite_differences() {
        let mut r = rng(3);
        let net = Mlp::new(&[4, 8, 8, 3], &mut r, false);
        let input: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();

        let loss = |net: &Mlp, input: &[f64]| -> f64 {
            let mut cache = MlpCache::default();
            net.forward(input, &mut cache);
            cache.output().iter().zip(&target).map(|(y, t)| 0.5 * (y - t).powi(2)).sum()
        };

        let mut cache = MlpCache::default();
        net.forward(&input, &mut cache);
        let grad_out: Vec<f64> =
            cache.output().iter().zip(&target).map(|(y, t)| y - t).collect();
        let mut grads = vec![0.0; net.param_count()];
        let mut grad_input = Vec::new();
        net.backward(&cache, &grad_out, Some(&mut grads), Some(&mut grad_input));

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let mut probe = net.clone();
        for i in 0..net.param_count() {
            let orig = net.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = loss(&probe, &input);
            probe.params_mut()[i] = orig - h;
            let down = loss(&probe, &input);
            probe.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grads[i]).abs() / fd.abs().max(1.0));
        }
        assert!(worst < 1e-7, "parameter gradient mismatch {worst:.3e}");

        let mut worst: f64 = 0.0;
        let mut x = input.clone();
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + h;
            let up = loss(&net, &x);
            x[i] = orig - h;
            let down = loss(&net, &x);
            x[i] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grad_input[i]).abs() / fd.abs().max(1.0));
        }
        assert!(worst < 1e-7, "input gradient mismatch {worst:.3e}");
    }

    #[test]
    fn backward_accumulates() {
        let net = Mlp::new(&[2, 3, 1], &mut rng(4), false);
        let mut cache = MlpCache::default();
        net.forward(&[0.2, -0.4], &mut cache);
        let mut once = vec![0.0; net.param_count()];
        net.backward(&cache, &[1.0], Some(&mut once), None);
        let mut twice = vec![0.0; net.param_count()];
        net.backward(&cache, &[1.0], Some(&mut twice), None);
        net.backward(&cache, &[1.0], Some(&mut twice), None);
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn soft_update_moves_toward_online() {
        let online = Mlp::new(&[2, 3, 1], &mut rng(5), false);
        let mut target = Mlp::new(&[2, 3, 1], &mut rng(6), false);
        let before = target.params().to_vec();
        target.soft_update_from(&online, 0.1);
        for ((t, b), o) in target.params().iter().zip(&before).zip(online.params()) {
            assert!((t - (0.1 * o + 0.9 * b)).abs() < 1e-15);
        }
        // tau = 1 copies exactly
        target.soft_update_from(&online, 1.0);
        assert_eq!(target.params(), online.params());
    }

    #[test]
    fn init_is_seeded() {
        let a = Mlp::new(&[3, 8, 2], &mut rng(7), false);
        let b = Mlp::new(&[3, 8, 2], &mut rng(7), false);
        let c = Mlp::new(&[3, 8, 2], &mut rng(8), false);
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }
}
