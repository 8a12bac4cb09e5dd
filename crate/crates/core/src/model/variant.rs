//! Model variants, registered by name.

use std::fmt;

use super::encoder::Posterior;
use super::params::GedParams;
use super::ModelError;

/// What distinguishes one encoder-decoder variant from another: how the
/// decoder's initial state is formed and which regulariser joins the
/// reconstruction loss.
pub trait ModelVariant: fmt::Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the initial state reads the label encoding through `wx`.
    fn conditioned(&self) -> bool {
        false
    }

    /// `h0 = z · Wl + bl`, plus `mean · Wx` for conditioned variants.
    fn initial_state(&self, params: &GedParams, z: &[f64], post: &Posterior) -> Vec<f64> {
        let mut h0 = params.wl.affine(z, &params.bl);
        if let (true, Some(wx)) = (self.conditioned(), &params.wx) {
            wx.vecmat_acc(&post.mean, &mut h0);
        }
        h0
    }

    /// Accumulates parameter gradients of the initial state; returns the
    /// gradients with respect to `z` and to the posterior mean.
    fn initial_state_backward(
        &self,
        params: &GedParams,
        z: &[f64],
        post: &Posterior,
        dh0: &[f64],
        grad: &mut GedParams,
    ) -> (Vec<f64>, Vec<f64>) {
        grad.wl.add_outer(z, dh0);
        grad.bl.add_slice(dh0);
        let mut dz = vec![0.0; z.len()];
        params.wl.back_acc(dh0, &mut dz);
        let mut dmean = vec![0.0; z.len()];
        if let (true, Some(wx), Some(gwx)) = (self.conditioned(), &params.wx, grad.wx.as_mut()) {
            gwx.add_outer(&post.mean, dh0);
            wx.back_acc(dh0, &mut dmean);
        }
        (dz, dmean)
    }

    /// Regulariser value and its gradients with respect to the posterior
    /// mean and variance.
    fn regularizer(&self, post: &Posterior) -> (f64, Vec<f64>, f64) {
        (0.0, vec![0.0; post.mean.len()], 0.0)
    }
}

/// The plain Gaussian encoder-decoder: the decoder sees the label only
/// through `z`.
#[derive(Clone, Debug, Default)]
pub struct Ged;

impl ModelVariant for Ged {
    fn name(&self) -> &'static str {
        "ged"
    }
}

/// Gaussian stochastic neural network: the decoder's initial state is also
/// conditioned on the posterior mean, and `β · KL(posterior ‖ prior)` is
/// added to the loss.
#[derive(Clone, Debug)]
pub struct Gsnn {
    pub beta: f64,
}

impl ModelVariant for Gsnn {
    fn name(&self) -> &'static str {
        "gsnn"
    }

    fn conditioned(&self) -> bool {
        true
    }

    fn regularizer(&self, post: &Posterior) -> (f64, Vec<f64>, f64) {
        let d = post.mean.len() as f64;
        let value = self.beta * post.kl_to_prior();
        let dmean = post.mean.iter().map(|m| self.beta * m).collect();
        let dvar = self.beta * 0.5 * d * (1.0 - 1.0 / post.var);
        (value, dmean, dvar)
    }
}

pub const VARIANTS: [&str; 2] = ["ged", "gsnn"];

/// Looks up a variant by name.
pub fn variant(name: &str, beta: f64) -> Result<Box<dyn ModelVariant>, ModelError> {
    match name {
        "ged" => Ok(Box::new(Ged)),
        "gsnn" => Ok(Box::new(Gsnn { beta })),
        other => Err(ModelError::UnknownVariant(other.to_string())),
    }
}
