//! Accumulated observables of one simulation: the active-site density
//! profile n(r,t) and the right-half particle number N_R(t).

use crate::model::SiteRange;
use std::io::Write;

/// Density profile and N_R series, either exact (`shots == 0`) or averaged
/// over a shot ensemble.
#[derive(Clone, Debug)]
pub struct ObservableSeries {
    pub site_range: SiteRange,
    pub t_max: u32,
    /// Mean n(r,t); row-major over t = 0..=t_max, r over site_range.
    pub density: Vec<f64>,
    /// Mean N_R(t) = sum over r >= 0 of n(r,t), for t = 0..=t_max.
    pub n_right: Vec<f64>,
    /// Standard error of N_R(t); zeros when the series is exact.
    pub n_right_se: Vec<f64>,
    /// Ensemble size; 0 marks a deterministic (exact) computation.
    pub shots: u64,
    /// Per-shot N_R trajectories when retention was requested.
    pub per_shot_nr: Option<Vec<Vec<u16>>>,
}

impl ObservableSeries {
    pub fn width(&self) -> usize {
        self.site_range.width()
    }

    pub fn density_at(&self, r: i32, t: u32) -> f64 {
        if !self.site_range.contains(r) || t > self.t_max {
            return 0.0;
        }
        self.density[t as usize * self.width() + (r - self.site_range.lo) as usize]
    }

    pub fn set_density(&mut self, r: i32, t: u32, value: f64) {
        let w = self.width();
        self.density[t as usize * w + (r - self.site_range.lo) as usize] = value;
    }

    pub fn zeros(site_range: SiteRange, t_max: u32, shots: u64) -> Self {
        let w = site_range.width();
        Self {
            site_range,
            t_max,
            density: vec![0.0; w * (t_max as usize + 1)],
            n_right: vec![0.0; t_max as usize + 1],
            n_right_se: vec![0.0; t_max as usize + 1],
            shots,
            per_shot_nr: None,
        }
    }

    /// Recompute N_R(t) from the density profile.
    pub fn n_right_from_density(&self, t: u32) -> f64 {
        self.site_range.iter().filter(|&r| r >= 0).map(|r| self.density_at(r, t)).sum()
    }

    /// CSV with columns `t,r,mean_n,shots`.
    pub fn write_density_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,mean_n,shots")?;
        for t in 0..=self.t_max {
            for r in self.site_range.iter() {
                writeln!(w, "{},{},{},{}", t, r, self.density_at(r, t), self.shots)?;
            }
        }
        Ok(())
    }

    /// CSV with columns `t,mean_NR,se_NR,shots`.
    pub fn write_series_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mean_NR,se_NR,shots")?;
        for t in 0..=self.t_max {
            writeln!(
                w,
                "{},{},{},{}",
                t, self.n_right[t as usize], self.n_right_se[t as usize], self.shots
            )?;
        }
        Ok(())
    }
}
