//! Fusion operators that turn per-modality feature vectors into the joint
//! vector `z_f` fed to the classifier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extractors::{FEATURE_DIM, MICRO_DIM};
use crate::{concat, hadamard, Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Text,
    Audio,
    Visual,
    Micro,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Text, Modality::Audio, Modality::Visual, Modality::Micro];

    /// Length of this modality's feature vector.
    pub fn feature_dim(self) -> usize {
        match self {
            Modality::Micro => MICRO_DIM,
            _ => FEATURE_DIM,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Visual => "visual",
            Modality::Micro => "micro",
        })
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "textual" => Ok(Modality::Text),
            "audio" => Ok(Modality::Audio),
            "visual" | "video" => Ok(Modality::Visual),
            "micro" | "micro-expression" => Ok(Modality::Micro),
            _ => Err(Error::invalid(
                "modality",
                format!("`{s}` is not one of text, audio, visual, micro"),
            )),
        }
    }
}

/// How the classifier input is assembled. Written as `unimodal:<modality>`,
/// `concat` or `hadamard_concat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionScheme {
    Unimodal(Modality),
    Concat,
    HadamardConcat,
}

impl FusionScheme {
    /// Classifier input dimension.
    pub fn input_dim(self) -> usize {
        match self {
            FusionScheme::Unimodal(m) => m.feature_dim(),
            FusionScheme::Concat => 3 * FEATURE_DIM + MICRO_DIM,
            FusionScheme::HadamardConcat => FEATURE_DIM + MICRO_DIM,
        }
    }

    pub fn uses(self, modality: Modality) -> bool {
        match self {
            FusionScheme::Unimodal(m) => m == modality,
            _ => true,
        }
    }

    /// Short model name: `MLP_U`, `MLP_C` or `MLP_H+C`.
    pub fn model_name(self) -> &'static str {
        match self {
            FusionScheme::Unimodal(_) => "MLP_U",
            FusionScheme::Concat => "MLP_C",
            FusionScheme::HadamardConcat => "MLP_H+C",
        }
    }
}

impl fmt::Display for FusionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionScheme::Unimodal(m) => write!(f, "unimodal:{m}"),
            FusionScheme::Concat => f.write_str("concat"),
            FusionScheme::HadamardConcat => f.write_str("hadamard_concat"),
        }
    }
}

impl FromStr for FusionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(FusionScheme::Concat),
            "hadamard_concat" | "hadamard-concat" => Ok(FusionScheme::HadamardConcat),
            _ => match s.strip_prefix("unimodal:") {
                Some(m) => Ok(FusionScheme::Unimodal(m.parse()?)),
                None => Err(Error::invalid(
                    "fusion scheme",
                    format!("`{s}` is not one of unimodal:<modality>, concat, hadamard_concat"),
                )),
            },
        }
    }
}

impl TryFrom<String> for FusionScheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FusionScheme> for String {
    fn from(s: FusionScheme) -> String {
        s.to_string()
    }
}

/// The joint representation entering the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Tensor,
    pub scheme: FusionScheme,
}

impl FusedVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_inputs(op: &'static str, t: &Tensor, a: &Tensor, v: &Tensor, m: &Tensor) -> Result<()> {
    let named = [("t_f", t, FEATURE_DIM), ("a_f", a, FEATURE_DIM), ("v_f", v, FEATURE_DIM), ("m_f", m, MICRO_DIM)];
    for (name, x, want) in named {
        if x.rank() != 1 || x.len() != want {
            return Err(Error::invalid(
                op,
                format!("{name} has shape {:?}, expected [{want}]", x.shape()),
            ));
        }
    }
    Ok(())
}

/// `[t; a; v; m]`, 939 values.
pub fn fuse_concat(t: &Tensor, a: &Tensor, v: &Tensor, m: &Tensor) -> Result<FusedVector> {
    check_inputs("fuse_concat", t, a, v, m)?;
    Ok(FusedVector {
        values: concat(&[t, a, v, m])?,
        scheme: FusionScheme::Concat,
    })
}

/// `[t ⊙ a ⊙ v; m]`, 339 values.
pub fn fuse_hadamard_concat(t: &Tensor, a: &Tensor, v: &Tensor, m: &Tensor) -> Result<FusedVector> {
    check_inputs("fuse_hadamard_concat", t, a, v, m)?;
    let p = hadamard(&hadamard(t, a)?, v)?;
    Ok(FusedVector {
        values: concat(&[&p, m])?,
        scheme: FusionScheme::HadamardConcat,
    })
}

/// Gradients of `fuse_hadamard_concat` with respect to `(t, a, v)` given
/// `dL/dz`. The micro-expression part has no parameters upstream.
pub(crate) fn hadamard_concat_backward(
    t: &Tensor,
    a: &Tensor,
    v: &Tensor,
    grad: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = Tensor::vector(grad.data()[..FEATURE_DIM].to_vec())?;
    let dt = hadamard(&g, &hadamard(a, v)?)?;
    let da = hadamard(&g, &hadamard(t, v)?)?;
    let dv = hadamard(&g, &hadamard(t, a)?)?;
    Ok((dt, da, dv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inputs(seed: u64) -> [Tensor; 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        [
            random_tensor(&[FEATURE_DIM], &mut rng),
            random_tensor(&[FEATURE_DIM], &mut rng),
            random_tensor(&[FEATURE_DIM], &mut rng),
            random_tensor(&[MICRO_DIM], &mut rng),
        ]
    }

    #[test]
    fn concat_layout() {
        let [t, a, v, m] = inputs(0);
        let z = fuse_concat(&Tensor::zeros(&[FEATURE_DIM]), &a, &v, &m).unwrap();
        assert_eq!(z.len(), 939);
        assert!(z.values.data()[..300].iter().all(|&x| x == 0.0));
        let z = fuse_concat(&t, &a, &v, &m).unwrap();
        for i in 0..FEATURE_DIM {
            assert_eq!(z.values.data()[600 + i], v.data()[i]);
        }
        assert_eq!(&z.values.data()[900..], m.data());
    }

    #[test]
    fn hadamard_layout() {
        let [t, _, _, m] = inputs(1);
        let ones = Tensor::ones(&[FEATURE_DIM]);
        let z = fuse_hadamard_concat(&t, &ones, &ones, &m).unwrap();
        assert_eq!(z.len(), 339);
        assert_eq!(&z.values.data()[..300], t.data());
        assert_eq!(&z.values.data()[300..], m.data());

        let mut t0 = t.clone();
        t0.data_mut()[17] = 0.0;
        let [_, a, v, _] = inputs(2);
        assert_eq!(fuse_hadamard_concat(&t0, &a, &v, &m).unwrap().values.data()[17], 0.0);
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let [t, a, v, m] = inputs(3);
        assert!(fuse_concat(&m, &a, &v, &m).is_err());
        assert!(fuse_hadamard_concat(&t, &a, &v, &t).is_err());
        let err = fuse_concat(&t, &Tensor::zeros(&[299]), &v, &m).unwrap_err().to_string();
        assert!(err.contains("a_f"), "{err}");
    }

    #[test]
    fn scheme_round_trips_through_text() {
        for s in ["concat", "hadamard_concat", "unimodal:micro", "unimodal:audio", "unimodal:visual", "unimodal:text"] {
            let scheme: FusionScheme = s.parse().unwrap();
            assert_eq!(scheme.to_string(), s);
            let json = serde_json::to_string(&scheme).unwrap();
            assert_eq!(serde_json::from_str::<FusionScheme>(&json).unwrap(), scheme);
        }
        assert!("sum".parse::<FusionScheme>().is_err());
        assert!("unimodal:smell".parse::<FusionScheme>().is_err());
        assert_eq!(FusionScheme::Unimodal(Modality::Micro).input_dim(), 39);
        assert_eq!(FusionScheme::Unimodal(Modality::Audio).input_dim(), 300);
        assert_eq!(FusionScheme::Concat.input_dim(), 939);
        assert_eq!(FusionScheme::HadamardConcat.input_dim(), 339);
    }

    #[test]
    fn hadamard_backward_matches_product_rule() {
        let [t, a, v, m] = inputs(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_tensor(&[339], &mut rng);
        let (dt, da, dv) = hadamard_concat_backward(&t, &a, &v, &g).unwrap();
        let loss = |t: &Tensor, a: &Tensor, v: &Tensor| -> f64 {
            let z = fuse_hadamard_concat(t, a, v, &m).unwrap();
            z.values.data().iter().zip(g.data()).map(|(x, y)| x * y).sum()
        };
        let h = 1e-6;
        for i in [0, 150, 299] {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp.data_mut()[i] += h;
            tm.data_mut()[i] -= h;
            let fd = (loss(&tp, &a, &v) - loss(&tm, &a, &v)) / (2.0 * h);
            assert!((fd - dt.data()[i]).abs() < 1e-8);
            let (mut ap, mut am) = (a.clone(), a.clone());
            ap.data_mut()[i] += h;
            am.data_mut()[i] -= h;
            let fd = (loss(&t, &ap, &v) - loss(&t, &am, &v)) / (2.0 * h);
            assert!((fd - da.data()[i]).abs() < 1e-8);
            let (mut vp, mut vm) = (v.clone(), v.clone());
            vp.data_mut()[i] += h;
            vm.data_mut()[i] -= h;
            let fd = (loss(&t, &a, &vp) - loss(&t, &a, &vm)) / (2.0 * h);
            assert!((fd - dv.data()[i]).abs() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fused_lengths_are_fixed(seed in any::<u64>()) {
            let [t, a, v, m] = inputs(seed);
            prop_assert_eq!(fuse_concat(&t, &a, &v, &m).unwrap().len(), 300 + 300 + 300 + 39);
            prop_assert_eq!(fuse_hadamard_concat(&t, &a, &v, &m).unwrap().len(), 300 + 39);
        }

        #[test]
        fn hadamard_is_symmetric_in_feature_modalities(seed in any::<u64>()) {
            let [t, a, v, m] = inputs(seed);
            let base = fuse_hadamard_concat(&t, &a, &v, &m).unwrap();
            for (x, y, w) in [(&a, &t, &v), (&v, &a, &t), (&t, &v, &a)] {
                let z = fuse_hadamard_concat(x, y, w, &m).unwrap();
                for (p, q) in z.values.data().iter().zip(base.values.data()) {
                    prop_assert!((p - q).abs() <= 1e-15 * q.abs().max(1e-300));
                }
            }
        }

        #[test]
        fn concat_is_order_sensitive(seed in any::<u64>()) {
            let [t, a, v, m] = inputs(seed);
            prop_assert_ne!(fuse_concat(&t, &a, &v, &m).unwrap(), fuse_concat(&a, &t, &v, &m).unwrap());
        }
    }
}
