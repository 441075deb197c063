use super::{bootstrap_replicates, group_sizes, percentile_interval, two_sided_p_value, AteEstimate, BootstrapConfig, Method};
use crate::error::{Error, Result};

/// Self-normalized inverse-propensity contrast over the units in `idx`.
pub fn hajek(y: &[f64], t: &[u8], scores: &[f64], idx: impl IntoIterator<Item = usize>) -> f64 {
    let (mut s1, mut w1, mut s0, mut w0) = (0.0, 0.0, 0.0, 0.0);
    for i in idx {
        if t[i] == 1 {
            let w = 1.0 / scores[i];
            s1 += w * y[i];
            w1 += w;
        } else {
            let w = 1.0 / (1.0 - scores[i]);
            s0 += w * y[i];
            w0 += w;
        }
    }
    s1 / w1 - s0 / w0
}

pub fn ate_ipw(y: &[f64], t: &[u8], scores: &[f64], boot: &BootstrapConfig) -> Result<AteEstimate> {
    let (n1, n0) = group_sizes(y, t, scores.len())?;
    if let Some(bad) = scores.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Precondition(format!(
            "propensity score {bad} is outside (0, 1); trim the sample before weighting"
        )));
    }
    let ate = hajek(y, t, scores, 0..y.len());
    let reps = bootstrap_replicates(t, boot, |idx, _| Ok(hajek(y, t, scores, idx.iter().copied())))?;
    let (ci_lo, ci_hi) = percentile_interval(&reps, ate);
    Ok(AteEstimate {
        method: Method::Ipw,
        ate,
        ci_lo,
        ci_hi,
        p_value: Some(two_sided_p_value(&reps)),
        n_treated: n1,
        n_control: n0,
        warnings: Vec::new(),
    })
}
