//! Intraclass correlation from two-way ANOVA mean squares.

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Subjects × raters grid of scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    ratings: Vec<Vec<f64>>,
}

impl RatingMatrix {
    /// Rows are subjects, columns are raters. Needs ≥ 2 of each and no gaps.
    pub fn new(ratings: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        if ratings.len() < 2 {
            return Err(MetricError::InvalidParameter("need at least 2 subjects".into()));
        }
        let raters = ratings[0].len();
        if raters < 2 {
            return Err(MetricError::InvalidParameter("need at least 2 raters".into()));
        }
        if let Some(i) = ratings.iter().position(|r| r.len() != raters) {
            return Err(MetricError::InvalidParameter(format!("subject {i} has a missing rating")));
        }
        if ratings.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MetricError::InvalidParameter("ratings must be finite".into()));
        }
        Ok(RatingMatrix { ratings })
    }

    pub fn subjects(&self) -> usize {
        self.ratings.len()
    }

    pub fn raters(&self) -> usize {
        self.ratings[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.ratings
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IccForm {
    /// ICC(2,1): agreement of a single rater.
    TwoWayRandomSingle,
    /// ICC(2,k): agreement of the mean of k raters.
    #[default]
    TwoWayRandomAverage,
}

impl IccForm {
    pub fn label(self) -> &'static str {
        match self {
            IccForm::TwoWayRandomSingle => "ICC(2,1) two-way random, single measures",
            IccForm::TwoWayRandomAverage => "ICC(2,k) two-way random, average measures",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub ms_subjects: f64,
    pub ms_raters: f64,
    pub ms_error: f64,
    pub subjects: usize,
    pub raters: usize,
}

pub fn two_way_anova(matrix: &RatingMatrix) -> Result<AnovaTable, MetricError> {
    let n = matrix.subjects();
    let k = matrix.raters();
    let total = (n * k) as f64;
    let grand = matrix.ratings.iter().flatten().sum::<f64>() / total;

    let ss_total: f64 = matrix.ratings.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    if ss_total == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    let row_means: Vec<f64> = matrix.ratings.iter().map(|row| row.iter().sum::<f64>() / k as f64).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| matrix.ratings.iter().map(|row| row[j]).sum::<f64>() / n as f64)
        .collect();
    let ss_subjects = row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * k as f64;
    let ss_raters = col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() * n as f64;
    // Residuals summed directly rather than by subtraction, so perfect
    // agreement gives an exact zero.
    let ss_error: f64 = matrix
        .ratings
        .iter()
        .zip(&row_means)
        .flat_map(|(row, rm)| row.iter().zip(&col_means).map(move |(x, cm)| (x - rm - cm + grand).powi(2)))
        .sum();

    Ok(AnovaTable {
        ms_subjects: ss_subjects / (n - 1) as f64,
        ms_raters: ss_raters / (k - 1) as f64,
        ms_error: ss_error / ((n - 1) * (k - 1)) as f64,
        subjects: n,
        raters: k,
    })
}

/// ICC in the requested form, clamped to [-1, 1].
pub fn icc(matrix: &RatingMatrix, form: IccForm) -> Result<f64, MetricError> {
    let a = two_way_anova(matrix)?;
    let n = a.subjects as f64;
    let k = a.raters as f64;
    let numerator = a.ms_subjects - a.ms_error;
    let denominator = match form {
        IccForm::TwoWayRandomSingle => a.ms_subjects + (k - 1.0) * a.ms_error + k * (a.ms_raters - a.ms_error) / n,
        IccForm::TwoWayRandomAverage => a.ms_subjects + (a.ms_raters - a.ms_error) / n,
    };
    if denominator == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((numerator / denominator).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement() {
        let m = RatingMatrix::new(vec![vec![1.0, 1.0, 1.0], vec![3.0, 3.0, 3.0], vec![5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(icc(&m, IccForm::TwoWayRandomSingle).unwrap(), 1.0);
        assert_eq!(icc(&m, IccForm::TwoWayRandomAverage).unwrap(), 1.0);
    }

    #[test]
    fn constant_matrix_is_undefined() {
        let m = RatingMatrix::new(vec![vec![4.0, 4.0], vec![4.0, 4.0]]).unwrap();
        assert!(matches!(icc(&m, IccForm::TwoWayRandomSingle), Err(MetricError::ZeroVariance)));
    }

    #[test]
    fn shape_checks() {
        assert!(RatingMatrix::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(RatingMatrix::new(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(RatingMatrix::new(vec![vec![1.0, 2.0], vec![2.0]]).is_err());
    }
}
