//! Published ensemble statistics used by `--check`.

use crate::config::Scenario;

/// Mean and standard deviation of one table cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

const fn s(mean: f64, std: f64) -> Stat {
    Stat { mean, std }
}

/// Biased GGM statistics of three-qubit outputs, `[rank 2, 3, 4][outcome 1..4]`.
pub const BIASED_3Q: [[Stat; 4]; 3] = [
    [s(0.4961, 0.0111), s(0.0369, 0.0502), s(0.0708, 0.0904), s(0.0370, 0.0503)],
    [s(0.3353, 0.0547), s(0.0546, 0.0655), s(0.0649, 0.0876), s(0.0518, 0.0610)],
    [s(0.2617, 0.0319), s(0.0290, 0.0422), s(0.0289, 0.0424), s(0.0289, 0.0422)],
];

/// Biased GGM statistics of four-qubit outputs, `[rank 2, 3, 4][outcome 1..4]`.
pub const BIASED_4Q: [[Stat; 4]; 3] = [
    [s(0.2765, 0.0724), s(0.0593, 0.0542), s(0.1012, 0.0783), s(0.0594, 0.0543)],
    [s(0.2618, 0.0637), s(0.0827, 0.0551), s(0.0959, 0.0738), s(0.0822, 0.0595)],
    [s(0.2096, 0.0369), s(0.0573, 0.0451), s(0.0571, 0.0455), s(0.0576, 0.0466)],
];

/// Unbiased single-outcome GGM statistics, `[rank 2, 3, 4]`, for three-qubit outputs.
pub const UNBIASED_3Q: [Stat; 3] = [s(0.1621, 0.0691), s(0.1614, 0.0681), s(0.1066, 0.0370)];

/// Same for four-qubit outputs.
pub const UNBIASED_4Q: [Stat; 3] = [s(0.1255, 0.0968), s(0.1233, 0.0923), s(0.0748, 0.0458)];

/// Five-qubit GGM and tangle statistics per resource split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResourceRow {
    pub ggm: Stat,
    pub tangle: Stat,
}

pub fn resource_biased(sc: Scenario) -> ResourceRow {
    match sc {
        Scenario::FourPlusOne => ResourceRow { ggm: s(0.2928, 0.0514), tangle: s(0.8224, 0.1175) },
        Scenario::GhzPlusTwo => ResourceRow { ggm: s(0.1904, 0.0739), tangle: s(0.5074, 0.2010) },
        Scenario::WPlusTwo => ResourceRow { ggm: s(0.0965, 0.0750), tangle: s(0.1676, 0.1275) },
        Scenario::TwoPlusThree => ResourceRow { ggm: s(0.1663, 0.1164), tangle: s(0.4913, 0.2915) },
    }
}

pub fn resource_unbiased(sc: Scenario) -> ResourceRow {
    match sc {
        Scenario::FourPlusOne => ResourceRow { ggm: s(0.2295, 0.0544), tangle: s(0.6131, 0.1466) },
        Scenario::GhzPlusTwo => ResourceRow { ggm: s(0.1619, 0.0687), tangle: s(0.4165, 0.1784) },
        Scenario::WPlusTwo => ResourceRow { ggm: s(0.0633, 0.0561), tangle: s(0.1580, 0.1504) },
        Scenario::TwoPlusThree => ResourceRow { ggm: s(0.1188, 0.0861), tangle: s(0.4711, 0.3048) },
    }
}

/// Expected descending order of mean five-qubit GGM across resource splits.
pub const RESOURCE_ORDER: [Scenario; 4] =
    [Scenario::FourPlusOne, Scenario::GhzPlusTwo, Scenario::TwoPlusThree, Scenario::WPlusTwo];

/// Largest cluster-state fidelity reported for the generalized rank-2 family.
pub const CLUSTER_FIDELITY: f64 = 0.73;

pub fn rank_index(rank: usize) -> usize {
    rank - 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_are_internally_consistent() {
        for rows in [BIASED_3Q, BIASED_4Q] {
            for r in rows {
                assert!(r.iter().all(|c| c.mean > 0.0 && c.mean < 0.5 && c.std > 0.0));
                assert!(r[1..].iter().all(|c| c.mean < r[0].mean));
            }
        }
        let biased: Vec<f64> = RESOURCE_ORDER.iter().map(|&s| resource_biased(s).ggm.mean).collect();
        let unbiased: Vec<f64> = RESOURCE_ORDER.iter().map(|&s| resource_unbiased(s).ggm.mean).collect();
        assert!(biased.windows(2).all(|w| w[0] > w[1]));
        assert!(unbiased.windows(2).all(|w| w[0] > w[1]));
    }
}
