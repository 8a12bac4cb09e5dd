//! Evidence encoders and the closed-form Normal posterior over the latent.

use rand::Rng;
use rand_distr::StandardNormal;

use super::params::GedParams;
use super::ModelError;
use crate::labels::{EncodedLabel, EvidenceKind};

/// `f(x) = tanh((Wh[x] + bh) · Wd + bd)`.
pub fn encode_element(params: &GedParams, kind: EvidenceKind, index: usize) -> Result<Vec<f64>, ModelError> {
    let e = &params.enc[kind.index()];
    if index >= e.wh.rows {
        return Err(ModelError::IndexOutOfVocabulary { kind: kind.name(), index, size: e.wh.rows });
    }
    Ok(encode_hidden(params, kind, index).1)
}

fn encode_hidden(params: &GedParams, kind: EvidenceKind, index: usize) -> (Vec<f64>, Vec<f64>) {
    let e = &params.enc[kind.index()];
    let a: Vec<f64> = e.wh.row(index).iter().zip(&e.bh.data).map(|(w, b)| w + b).collect();
    let mut f = e.wd.affine(&a, &e.bd);
    super::tensor::tanh_in_place(&mut f);
    (a, f)
}

/// Isotropic Normal: `N(mean, var · I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub var: f64,
}

impl Posterior {
    pub fn prior(d: usize) -> Self {
        Posterior { mean: vec![0.0; d], var: 1.0 }
    }

    /// Log density at `z`.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let sq: f64 = z.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        -0.5 * (d * (2.0 * std::f64::consts::PI * self.var).ln() + sq / self.var)
    }

    /// `KL(self ‖ N(0, I))`.
    pub fn kl_to_prior(&self) -> f64 {
        let d = self.mean.len() as f64;
        let m2: f64 = self.mean.iter().map(|m| m * m).sum();
        0.5 * (d * self.var + m2 - d - d * self.var.ln())
    }
}

/// An encoded element: (index, hidden `a`, output `f`).
type ElementTrace = (usize, Vec<f64>, Vec<f64>);

/// Intermediate values of a posterior evaluation, kept for backprop.
#[derive(Clone, Debug)]
pub struct PosteriorTrace {
    elements: [Vec<ElementTrace>; 3],
    /// Per kind: `Σ_j f(x_kj)`.
    sums: [Vec<f64>; 3],
    /// Per kind: `σ_k⁻²`.
    precision: [f64; 3],
    xbar: Vec<f64>,
    n: f64,
}

/// `mean = X̄ / (1 + n)`, `var = 1 / (1 + n)`, where
/// `X̄ = Σ_k σ_k⁻² Σ_j f(x_kj)` and `n = Σ_k n_k σ_k⁻²`.
pub fn posterior(label: &EncodedLabel, params: &GedParams) -> Posterior {
    posterior_traced(label, params).0
}

pub fn posterior_traced(label: &EncodedLabel, params: &GedParams) -> (Posterior, PosteriorTrace) {
    let d = params.wl.rows;
    let mut tr = PosteriorTrace {
        elements: Default::default(),
        sums: Default::default(),
        precision: [0.0; 3],
        xbar: vec![0.0; d],
        n: 0.0,
    };
    for kind in EvidenceKind::ALL {
        let k = kind.index();
        let prec = (-2.0 * params.enc[k].log_sigma.data[0]).exp();
        let mut sum = vec![0.0; d];
        for &i in &label.elements[k] {
            let (a, f) = encode_hidden(params, kind, i);
            sum.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
            tr.elements[k].push((i, a, f));
        }
        tr.xbar.iter_mut().zip(&sum).for_each(|(x, s)| *x += prec * s);
        tr.n += label.elements[k].len() as f64 * prec;
        tr.sums[k] = sum;
        tr.precision[k] = prec;
    }
    let var = 1.0 / (1.0 + tr.n);
    let mean = tr.xbar.iter().map(|x| x * var).collect();
    (Posterior { mean, var }, tr)
}

/// Accumulates into `grad` the gradient reaching the encoder from `dmean`
/// and `dvar`.
pub fn posterior_backward(params: &GedParams, tr: &PosteriorTrace, dmean: &[f64], dvar: f64, grad: &mut GedParams) {
    let s = 1.0 + tr.n;
    let dxbar: Vec<f64> = dmean.iter().map(|g| g / s).collect();
    let dn = -super::tensor::dot(dmean, &tr.xbar) / (s * s) - dvar / (s * s);
    for kind in EvidenceKind::ALL {
        let k = kind.index();
        let prec = tr.precision[k];
        let dprec = super::tensor::dot(&dxbar, &tr.sums[k]) + dn * tr.elements[k].len() as f64;
        grad.enc[k].log_sigma.data[0] += dprec * -2.0 * prec;
        let df: Vec<f64> = dxbar.iter().map(|g| g * prec).collect();
        let p = &params.enc[k];
        let g = &mut grad.enc[k];
        for (i, a, f) in &tr.elements[k] {
            let dout: Vec<f64> = df.iter().zip(f).map(|(g, f)| g * (1.0 - f * f)).collect();
            g.wd.add_outer(a, &dout);
            g.bd.add_slice(&dout);
            let mut da = vec![0.0; a.len()];
            p.wd.back_acc(&dout, &mut da);
            g.wh.add_to_row(*i, &da);
            g.bh.add_slice(&da);
        }
    }
}

/// Draws standard normal noise of dimension `d`.
pub fn standard_normal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Reparameterised draw `z = mean + sqrt(var) · ε`.
pub fn sample_z_with(post: &Posterior, eps: &[f64]) -> Vec<f64> {
    let s = post.var.sqrt();
    post.mean.iter().zip(eps).map(|(m, e)| m + s * e).collect()
}

pub fn sample_z<R: Rng + ?Sized>(post: &Posterior, rng: &mut R) -> Vec<f64> {
    let eps = standard_normal(post.mean.len(), rng);
    sample_z_with(post, &eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::Shapes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> GedParams {
        let s = Shapes { vocab: [3, 2, 2], enc_units: [2, 2, 2], latent: 2, hidden: 3, symbols: 9, conditioned: false };
        GedParams::init(&s, &mut ChaCha8Rng::seed_from_u64(5))
    }

    #[test]
    fn hand_computed_element() {
        let mut p = params();
        let e = &mut p.enc[0];
        e.wh.data = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        e.bh.data = vec![0.0, -0.1];
        e.wd.data = vec![1.0, 0.0, 0.5, -1.0];
        e.bd.data = vec![0.05, 0.0];
        // a = [0.3, 0.3]; a·Wd + bd = [0.3 + 0.15 + 0.05, -0.3]
        let f = encode_element(&p, EvidenceKind::Calls, 1).unwrap();
        assert!((f[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((f[1] - (-0.3f64).tanh()).abs() < 1e-15);
        assert!(encode_element(&p, EvidenceKind::Calls, 3).is_err());
    }

    #[test]
    fn zero_weights_encode_to_zero() {
        let mut p = params();
        p.for_each_mut(|_, t| t.fill(0.0));
        assert_eq!(encode_element(&p, EvidenceKind::Keys, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn empty_label_is_prior() {
        assert_eq!(posterior(&EncodedLabel::default(), &params()), Posterior::prior(2));
    }

    #[test]
    fn single_element_halves() {
        let p = params();
        let label = EncodedLabel { elements: [vec![2], vec![], vec![]] };
        let post = posterior(&label, &p);
        let f = encode_element(&p, EvidenceKind::Calls, 2).unwrap();
        assert_eq!(post.var, 0.5);
        assert_eq!(post.mean, vec![f[0] / 2.0, f[1] / 2.0]);
    }

    #[test]
    fn zero_noise_gives_mean() {
        let post = Posterior { mean: vec![0.3, -1.0], var: 0.25 };
        assert_eq!(sample_z_with(&post, &[0.0, 0.0]), post.mean);
        assert_eq!(sample_z_with(&post, &[2.0, 0.0]), vec![1.3, -1.0]);
    }

    #[test]
    fn kl_of_prior_is_zero() {
        assert_eq!(Posterior::prior(3).kl_to_prior(), 0.0);
        assert!(Posterior { mean: vec![0.1], var: 0.5 }.kl_to_prior() > 0.0);
    }
}
