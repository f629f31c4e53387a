use rand::Rng;

use crate::attention::{cam_backward, cam_forward, sam_backward, sam_forward, single_input, CamParams, SamParams};
use crate::error::Result;
use crate::tensor::{Differentiable, Tensor};
use crate::Scalar;

/// Channel attention followed by spatial attention.
#[derive(Debug, Clone, PartialEq)]
pub struct CbamParams<T> {
    pub cam: CamParams<T>,
    pub sam: SamParams<T>,
}

impl<T: Scalar> CbamParams<T> {
    pub fn zeros(channels: usize, reduction: usize) -> Result<Self> {
        Ok(Self { cam: CamParams::zeros(channels, reduction)?, sam: SamParams::zeros() })
    }

    pub fn random<R: Rng + ?Sized>(channels: usize, reduction: usize, rng: &mut R) -> Result<Self> {
        Ok(Self { cam: CamParams::random(channels, reduction, rng)?, sam: SamParams::random(rng) })
    }
}

pub fn cbam_forward<T: Scalar>(x: &Tensor<T>, cam: &CamParams<T>, sam: &SamParams<T>) -> Result<Tensor<T>> {
    sam_forward(&cam_forward(x, cam)?, sam)
}

pub fn cbam_backward<T: Scalar>(x: &Tensor<T>, cam: &CamParams<T>, sam: &SamParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let mid = cam_forward(x, cam)?;
    let g_mid = sam_backward(&mid, sam, g)?;
    cam_backward(x, cam, &g_mid)
}

impl<T: Scalar> Differentiable<T> for CbamParams<T> {
    fn name(&self) -> String {
        "cbam".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![cbam_forward(single_input(inputs, "cbam")?, &self.cam, &self.sam)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "cbam upstream")?;
        Ok(vec![cbam_backward(single_input(inputs, "cbam")?, &self.cam, &self.sam, g)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_quarter_input() {
        let x = Tensor::from_fn([1, 4, 3, 3], |_, c, h, w| c as f64 * 1.5 - (h + w) as f64);
        let p = CbamParams::zeros(4, 2).unwrap();
        assert_eq!(cbam_forward(&x, &p.cam, &p.sam).unwrap(), x.scale(0.25));
    }

    #[test]
    fn equals_manual_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = CbamParams::<f64>::random(4, 2, &mut rng).unwrap();
        let x = Tensor::random_uniform([2, 4, 5, 5], -1.0, 1.0, &mut rng);
        let manual = sam_forward(&cam_forward(&x, &p.cam).unwrap(), &p.sam).unwrap();
        assert_eq!(cbam_forward(&x, &p.cam, &p.sam).unwrap(), manual);
    }
}
