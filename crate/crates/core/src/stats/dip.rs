use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::SortedSample;
use crate::rng::Stream;
use crate::{Error, Result};

/// Observed dip with its bootstrap p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DipResult {
    pub dip: f64,
    pub p_value: f64,
    pub bootstrap_count: usize,
}

/// Hartigan's dip: sup distance between the empirical CDF and the closest
/// unimodal CDF. Always at least `1/(2n)`.
pub fn dip_statistic(sample: &SortedSample) -> Result<f64> {
    if sample.len() < 4 {
        return Err(Error::InvalidInput("dip statistic needs at least 4 samples".into()));
    }
    Ok(DipWorkspace::new(sample.len()).dip(sample.values()))
}

/// Scratch arrays for repeated dip evaluations (1-based, length n + 1).
#[derive(Debug, Clone, Default)]
pub struct DipWorkspace {
    mn: Vec<usize>,
    mj: Vec<usize>,
    gcm: Vec<usize>,
    lcm: Vec<usize>,
}

impl DipWorkspace {
    pub fn new(n: usize) -> Self {
        let mut w = DipWorkspace::default();
        w.resize(n);
        w
    }

    fn resize(&mut self, n: usize) {
        for v in [&mut self.mn, &mut self.mj, &mut self.gcm, &mut self.lcm] {
            v.clear();
            v.resize(n + 2, 0);
        }
    }

    /// Dip of an already sorted slice.
    pub fn dip(&mut self, sorted: &[f64]) -> f64 {
        let n = sorted.len();
        if self.mn.len() < n + 2 {
            self.resize(n);
        }
        let x = |i: usize| sorted[i - 1];
        let (mn, mj, gcm, lcm) = (&mut self.mn, &mut self.mj, &mut self.gcm, &mut self.lcm);

        // Twice n times the dip, in count units, until the very end.
        let mut dip = 1.0;
        if n < 2 || x(n) == x(1) {
            return dip / (2 * n).max(1) as f64;
        }
        let mut low = 1;
        let mut high = n;

        mn[1] = 1;
        for j in 2..=n {
            mn[j] = j - 1;
            loop {
                let mnj = mn[j];
                let mnmnj = mn[mnj];
                if mnj == 1 || (x(j) - x(mnj)) * ((mnj - mnmnj) as f64) < (x(mnj) - x(mnmnj)) * ((j - mnj) as f64) {
                    break;
                }
                mn[j] = mnmnj;
            }
        }

        mj[n] = n;
        for k in (1..n).rev() {
            mj[k] = k + 1;
            loop {
                let mjk = mj[k];
                let mjmjk = mj[mjk];
                if mjk == n
                    || (x(k) - x(mjk)) * (mjk as f64 - mjmjk as f64) < (x(mjk) - x(mjmjk)) * (k as f64 - mjk as f64)
                {
                    break;
                }
                mj[k] = mjmjk;
            }
        }

        loop {
            gcm[1] = high;
            let mut i = 1;
            while gcm[i] > low {
                gcm[i + 1] = mn[gcm[i]];
                i += 1;
            }
            let l_gcm = i;
            let mut ig = l_gcm;
            let mut ix = ig - 1;

            lcm[1] = low;
            let mut i = 1;
            while lcm[i] < high {
                lcm[i + 1] = mj[lcm[i]];
                i += 1;
            }
            let l_lcm = i;
            let mut ih = l_lcm;
            let mut iv = 2;

            let mut d = 0.0;
            if l_gcm != 2 || l_lcm != 2 {
                loop {
                    let gcmix = gcm[ix];
                    let lcmiv = lcm[iv];
                    if gcmix > lcmiv {
                        let gcmi1 = gcm[ix + 1];
                        let dx = (lcmiv as f64 - gcmi1 as f64 + 1.0)
                            - (x(lcmiv) - x(gcmi1)) * (gcmix - gcmi1) as f64 / (x(gcmix) - x(gcmi1));
                        iv += 1;
                        if dx >= d {
                            d = dx;
                            ig = ix + 1;
                            ih = iv - 1;
                        }
                    } else {
                        let lcmiv1 = lcm[iv - 1];
                        let dx = (x(gcmix) - x(lcmiv1)) * (lcmiv - lcmiv1) as f64 / (x(lcmiv) - x(lcmiv1))
                            - (gcmix as f64 - lcmiv1 as f64 - 1.0);
                        ix = ix.saturating_sub(1);
                        if dx >= d {
                            d = dx;
                            ig = ix + 1;
                            ih = iv;
                        }
                    }
                    ix = ix.max(1);
                    iv = iv.min(l_lcm);
                    if gcm[ix] == lcm[iv] {
                        break;
                    }
                }
            } else {
                d = 1.0;
            }

            if d < dip {
                break;
            }

            let mut dip_l: f64 = 0.0;
            for j in ig..l_gcm {
                let mut max_t: f64 = 1.0;
                let (jb, je) = (gcm[j + 1], gcm[j]);
                if je - jb > 1 && x(je) != x(jb) {
                    let c = (je - jb) as f64 / (x(je) - x(jb));
                    for jj in jb..=je {
                        let t = (jj - jb + 1) as f64 - (x(jj) - x(jb)) * c;
                        max_t = max_t.max(t);
                    }
                }
                dip_l = dip_l.max(max_t);
            }

            let mut dip_u: f64 = 0.0;
            for j in ih..l_lcm {
                let mut max_t: f64 = 1.0;
                let (jb, je) = (lcm[j], lcm[j + 1]);
                if je - jb > 1 && x(je) != x(jb) {
                    let c = (je - jb) as f64 / (x(je) - x(jb));
                    for jj in jb..=je {
                        let t = (x(jj) - x(jb)) * c - (jj as f64 - jb as f64 - 1.0);
                        max_t = max_t.max(t);
                    }
                }
                dip_u = dip_u.max(max_t);
            }

            dip = dip.max(dip_u.max(dip_l));

            if low == gcm[ig] && high == lcm[ih] {
                break;
            }
            low = gcm[ig];
            high = lcm[ih];
        }
        dip / (2 * n) as f64
    }
}

/// Sorted dips of `b` Uniform(0,1) samples of one size, reusable across tests.
#[derive(Debug, Clone)]
pub struct DipNull {
    n: usize,
    dips: Vec<f64>,
}

impl DipNull {
    pub fn simulate(n: usize, b: usize, stream: Stream) -> Result<Self> {
        if b < 100 {
            return Err(Error::InvalidInput("dip bootstrap needs b >= 100".into()));
        }
        if n < 4 {
            return Err(Error::InvalidInput("dip statistic needs at least 4 samples".into()));
        }
        let mut rng = stream.rng();
        let mut ws = DipWorkspace::new(n);
        let mut u = vec![0.0; n];
        let mut dips = Vec::with_capacity(b);
        for _ in 0..b {
            // Order statistics of n uniforms from normalized exponential spacings.
            let mut acc = 0.0;
            for v in u.iter_mut() {
                let e: f64 = rng.sample(Exp1);
                acc += e;
                *v = acc;
            }
            let e: f64 = rng.sample(Exp1);
            let total = acc + e;
            u.iter_mut().for_each(|v| *v /= total);
            dips.push(ws.dip(&u));
        }
        dips.sort_by(f64::total_cmp);
        Ok(DipNull { n, dips })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> usize {
        self.dips.len()
    }

    /// Fraction of bootstrap dips at least as large as `dip`.
    pub fn p_value(&self, dip: f64) -> f64 {
        let below = self.dips.partition_point(|&d| d < dip);
        (self.dips.len() - below) as f64 / self.dips.len() as f64
    }
}

/// Dip with a bootstrap p-value against `b` uniform samples of the same size.
pub fn dip_test(sample: &SortedSample, b: usize, stream: Stream) -> Result<DipResult> {
    let dip = dip_statistic(sample)?;
    let null = DipNull::simulate(sample.len(), b, stream)?;
    Ok(DipResult { dip, p_value: null.p_value(dip), bootstrap_count: b })
}
