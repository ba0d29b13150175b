//! The three angle predictors compared in the sum-rate experiments.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::channel::{beamformer_from_angle, BeamVector, ChannelParams};
use crate::error::{check_len, Error, Result};
use crate::nn::Clrnet;
use crate::sensing::AngleHistory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Beams pointed at the true current angles.
    Perfect,
    /// One-step geometric extrapolation of the latest estimate.
    ModelBased,
    Clrnet,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Perfect, Method::ModelBased, Method::Clrnet];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Perfect => "perfect",
            Method::ModelBased => "model_based",
            Method::Clrnet => "clrnet",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or(Error::InvalidArgument("unknown prediction method"))
    }
}

/// Side information for the baselines, taken from the simulator at slot `n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelAux {
    pub velocities: Vec<f64>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionInput {
    pub history: AngleHistory,
    /// Only used by the model-based predictor.
    pub aux: Option<ModelAux>,
    /// Only used by the perfect predictor.
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedAngles {
    pub values: Vec<f64>,
    pub method: Method,
}

pub fn predict_perfect(truth: &[f64]) -> PredictedAngles {
    PredictedAngles {
        values: truth.to_vec(),
        method: Method::Perfect,
    }
}

/// `θ_P = arcsin(v ΔT sin θ_E / d) + θ_E` per vehicle.
pub fn predict_model_based(theta_est_prev: &[f64], v_prev: &[f64], d_prev: &[f64], dt: f64) -> Result<PredictedAngles> {
    let k = theta_est_prev.len();
    check_len("velocities", k, v_prev.len())?;
    check_len("distances", k, d_prev.len())?;
    let values = theta_est_prev
        .iter()
        .zip(v_prev)
        .zip(d_prev)
        .map(|((theta, v), d)| {
            if d.is_nan() || *d <= 0.0 {
                return Err(Error::DegenerateGeometry("distance must be positive"));
            }
            let s = v * dt * libm::sin(*theta) / d;
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::DegenerateGeometry("one-slot displacement exceeds the range"));
            }
            Ok(libm::asin(s) + theta)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PredictedAngles {
        values,
        method: Method::ModelBased,
    })
}

pub fn predict_clrnet(history: &AngleHistory, model: &Clrnet) -> Result<PredictedAngles> {
    Ok(PredictedAngles {
        values: model.predict(history)?,
        method: Method::Clrnet,
    })
}

/// Dispatches on `method`, pulling what it needs out of `input`.
pub fn predict(method: Method, input: &PredictionInput, dt: f64, model: Option<&Clrnet>) -> Result<PredictedAngles> {
    match method {
        Method::Perfect => input
            .truth
            .as_deref()
            .map(predict_perfect)
            .ok_or(Error::InvalidArgument("perfect predictor needs the true angles")),
        Method::ModelBased => {
            let aux = input
                .aux
                .as_ref()
                .ok_or(Error::InvalidArgument("model-based predictor needs velocities and distances"))?;
            predict_model_based(&input.history.latest(), &aux.velocities, &aux.distances, dt)
        }
        Method::Clrnet => {
            let model = model.ok_or(Error::InvalidArgument("CLRNet predictor needs a trained model"))?;
            predict_clrnet(&input.history, model)
        }
    }
}

/// `w_k = sqrt(p_k) a(θ_P[k])` for every vehicle.
pub fn beams_from_prediction(pred: &PredictedAngles, powers: &[f64], params: &ChannelParams) -> Result<Vec<BeamVector>> {
    check_len("powers", pred.values.len(), powers.len())?;
    pred.values
        .iter()
        .zip(powers)
        .map(|(theta, p)| beamformer_from_angle(*theta, *p, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{beam_alignment_gain, user_snr};
    use crate::nn::{ClrnetArch, ClrnetParams};
    use alloc::vec;

    #[test]
    fn perfect_is_identity_with_unit_gain() {
        let truth = [0.3, 0.38, 1.2];
        let p = predict_perfect(&truth);
        assert_eq!(p.values, truth.to_vec());
        for (t, q) in truth.iter().zip(&p.values) {
            assert!((beam_alignment_gain(*t, *q, 32).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn model_based_values() {
        let p = predict_model_based(&[0.4, 1.0], &[0.0, 0.0], &[20.0, 20.0], 0.02).unwrap();
        assert_eq!(p.values, vec![0.4, 1.0]);
        let p = predict_model_based(&[0.0], &[8.0], &[26.9], 0.02).unwrap();
        assert_eq!(p.values, vec![0.0]);
        let theta = 0.38051;
        let p = predict_model_based(&[theta], &[8.0], &[26.9258], 0.02).unwrap();
        let expected = theta + libm::asin(0.16 * libm::sin(theta) / 26.9258);
        assert!((p.values[0] - expected).abs() < 1e-15);
        assert!((p.values[0] - 0.38272).abs() < 1e-5);
    }

    #[test]
    fn model_based_domain_errors() {
        assert!(matches!(
            predict_model_based(&[1.0], &[100.0], &[0.1], 0.02),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(predict_model_based(&[1.0], &[8.0], &[0.0], 0.02).is_err());
        assert!(predict_model_based(&[1.0, 2.0], &[8.0], &[1.0], 0.02).is_err());
    }

    #[test]
    fn clrnet_wrapper() {
        let arch = ClrnetArch::new(8, 6);
        let model = Clrnet::new(arch, ClrnetParams::zeros(&arch)).unwrap();
        let h = AngleHistory::from_columns(&vec![vec![0.4; 8]; 6], 6).unwrap();
        let p = predict_clrnet(&h, &model).unwrap();
        assert_eq!(p.values, vec![0.0; 8]);
        assert_eq!(p.method, Method::Clrnet);
        let input = PredictionInput {
            history: h,
            aux: None,
            truth: None,
        };
        assert!(predict(Method::Clrnet, &input, 0.02, None).is_err());
        assert!(predict(Method::Perfect, &input, 0.02, None).is_err());
        assert!(predict(Method::ModelBased, &input, 0.02, None).is_err());
        assert_eq!(predict(Method::Clrnet, &input, 0.02, Some(&model)).unwrap(), p);
    }

    #[test]
    fn beams() {
        let params = ChannelParams::default();
        let pred = predict_perfect(&[0.4, 0.5]);
        let beams = beams_from_prediction(&pred, &[0.0, 0.0], &params).unwrap();
        assert!(beams.iter().all(|b| b.norm_sqr() == 0.0));

        let beams = beams_from_prediction(&pred, &[0.01, 0.02], &params).unwrap();
        let a = crate::channel::tx_steering(0.4, 32).unwrap();
        let snr = 32.0 * crate::channel::path_loss(20.0, &params).unwrap() * a.inner(&beams[0].entries).unwrap().norm_sqr()
            / params.noise_power;
        assert!((snr / user_snr(0.4, 0.4, 20.0, 0.01, &params).unwrap() - 1.0).abs() < 1e-12);

        // Perturbing vehicle 1's prediction leaves beam 0 unchanged.
        let moved = beams_from_prediction(&predict_perfect(&[0.4, 0.9]), &[0.01, 0.02], &params).unwrap();
        assert_eq!(moved[0], beams[0]);
        assert_ne!(moved[1], beams[1]);
    }

    #[test]
    fn method_tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        assert!("kalman".parse::<Method>().is_err());
    }
}
