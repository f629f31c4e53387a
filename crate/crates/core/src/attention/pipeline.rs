use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    cbam_backward, cbam_forward, eca_backward, eca_forward, init_tensor, init_vec, single_input, sppf_backward, sppf_forward,
    CbamParams, EcaParams, SppfParams, DEFAULT_REDUCTION,
};
use crate::error::{shape_err, Result};
use crate::tensor::backward as bw;
use crate::tensor::{ops, Differentiable, Tensor};
use crate::Scalar;

/// Padding of the 3×3 stem convolution.
pub const STEM_PAD: usize = 1;

/// Parameters of the smoke-test composition
/// `3×3 conv -> ECA -> CBAM -> SPPF`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoParams<T> {
    pub stem_kernel: Tensor<T>,
    pub stem_bias: Vec<T>,
    pub eca: EcaParams<T>,
    pub cbam: CbamParams<T>,
    pub sppf: SppfParams<T>,
}

impl<T: Scalar> DemoParams<T> {
    /// Seeded uniform initialisation of every parameter.
    pub fn random(c_in: usize, channels: usize, c_out: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stem_kernel = init_tensor([channels, c_in, 3, 3], &mut rng);
        let stem_bias = init_vec(channels, &mut rng);
        let eca = EcaParams::random(channels, &mut rng)?;
        let cbam = CbamParams::random(channels, DEFAULT_REDUCTION, &mut rng)?;
        let sppf = SppfParams::random(channels, (channels / 2).max(1), c_out, &mut rng);
        Ok(Self { stem_kernel, stem_bias, eca, cbam, sppf })
    }

    /// Random stem and SPPF, zero attention parameters.
    pub fn zero_attention(c_in: usize, channels: usize, c_out: usize, seed: u64) -> Result<Self> {
        let mut p = Self::random(c_in, channels, c_out, seed)?;
        p.eca = EcaParams::zeros(channels)?;
        p.cbam = CbamParams::zeros(channels, DEFAULT_REDUCTION)?;
        Ok(p)
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != self.stem_kernel.shape().c {
            return shape_err(format!("demo stem expects {} channels, input is {}", self.stem_kernel.shape().c, x.shape()));
        }
        Ok(())
    }
}

/// Intermediate activations of the demo composition.
#[derive(Debug, Clone)]
pub struct DemoStages<T> {
    pub stem: Tensor<T>,
    pub eca: Tensor<T>,
    pub cbam: Tensor<T>,
    pub output: Tensor<T>,
}

pub fn demo_stages<T: Scalar>(x: &Tensor<T>, p: &DemoParams<T>) -> Result<DemoStages<T>> {
    p.check(x)?;
    let stem = ops::conv2d(x, &p.stem_kernel, &p.stem_bias, STEM_PAD)?;
    let eca = eca_forward(&stem, &p.eca)?;
    let cbam = cbam_forward(&eca, &p.cbam.cam, &p.cbam.sam)?;
    let output = sppf_forward(&cbam, &p.sppf)?;
    Ok(DemoStages { stem, eca, cbam, output })
}

pub fn demo_forward<T: Scalar>(x: &Tensor<T>, p: &DemoParams<T>) -> Result<Tensor<T>> {
    Ok(demo_stages(x, p)?.output)
}

pub fn demo_backward<T: Scalar>(x: &Tensor<T>, p: &DemoParams<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let st = demo_stages(x, p)?;
    let g_cbam = sppf_backward(&st.cbam, &p.sppf, g)?;
    let g_eca = cbam_backward(&st.eca, &p.cbam.cam, &p.cbam.sam, &g_cbam)?;
    let g_stem = eca_backward(&st.stem, &p.eca, &g_eca)?;
    Ok(bw::conv2d_backward(x, &p.stem_kernel, STEM_PAD, &g_stem)?.input)
}

impl<T: Scalar> Differentiable<T> for DemoParams<T> {
    fn name(&self) -> String {
        "demo_pipeline".into()
    }

    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        Ok(vec![demo_forward(single_input(inputs, "demo_pipeline")?, self)?])
    }

    fn vjp(&self, inputs: &[Tensor<T>], upstream: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let g = single_input(upstream, "demo upstream")?;
        Ok(vec![demo_backward(single_input(inputs, "demo_pipeline")?, self, g)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn zero_attention_scales_stem_by_eighth() {
        let p = DemoParams::<f64>::zero_attention(3, 8, 6, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::random_uniform([1, 3, 6, 6], -1.0, 1.0, &mut rng);
        let st = demo_stages(&x, &p).unwrap();
        assert!(st.cbam.max_abs_diff(&st.stem.scale(0.125)).unwrap() <= 1e-12);
        assert_eq!(st.output.shape(), Shape::new(1, 6, 6, 6));
    }

    #[test]
    fn deterministic() {
        let p = DemoParams::<f64>::random(2, 4, 4, 9).unwrap();
        let q = DemoParams::<f64>::random(2, 4, 4, 9).unwrap();
        assert_eq!(p, q);
        let x = Tensor::full([1, 2, 5, 5], 0.3);
        assert_eq!(demo_forward(&x, &p).unwrap(), demo_forward(&x, &q).unwrap());
    }
}
