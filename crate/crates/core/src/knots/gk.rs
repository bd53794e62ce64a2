//! Genz–Keister nested rules for the standard normal density.
//!
//! Each level extends the previous one with the new nodes that maximize the
//! polynomial degree of exactness (1, 5, 15, 29, 51 for 1, 3, 9, 19, 35
//! knots). Values are tabulated to 17 significant digits; nodes shared
//! between levels are written with identical literals so nestedness is exact.
#![allow(clippy::excessive_precision)]

use super::Rule1D;
use crate::{Result, SgError};

/// Tabulated rule sizes.
pub const GK_SIZES: [usize; 5] = [1, 3, 9, 19, 35];

/// Genz–Keister rule with `count` knots for the standard normal density.
pub fn gk_knots(count: usize) -> Result<Rule1D> {
    let table: &[(f64, f64)] = match count {
        1 => &GK1,
        3 => &GK3,
        9 => &GK9,
        19 => &GK19,
        35 => &GK35,
        other => return Err(SgError::UnsupportedSize(other)),
    };
    Ok(Rule1D { nodes: table.iter().map(|p| p.0).collect(), weights: table.iter().map(|p| p.1).collect() })
}

const GK1: [(f64, f64); 1] = [(0.0, 1.0)];
const GK3: [(f64, f64); 3] =
    [(-1.7320508075688773, 0.16666666666666667), (0.0, 0.66666666666666667), (1.7320508075688773, 0.16666666666666667)];
const GK9: [(f64, f64); 9] = [
    (-4.1849560176727319, 9.4269457556517489e-5),
    (-2.8612795760570581, 0.0079963254708935328),
    (-1.7320508075688773, 0.094850948509485095),
    (-7.4109534999454084e-1, 0.27007432957793787),
    (0.0, 0.25396825396825397),
    (7.4109534999454084e-1, 0.27007432957793787),
    (1.7320508075688773, 0.094850948509485095),
    (2.8612795760570581, 0.0079963254708935328),
    (4.1849560176727319, 9.4269457556517489e-5),
];
const GK19: [(f64, f64); 19] = [
    (-6.36339449433637, 8.6296846022298858e-10),
    (-5.1870160399136561, 6.0948087314689835e-7),
    (-4.1849560176727319, 6.0123369459847818e-5),
    (-3.2053337944991945, 0.0028848804365067513),
    (-2.8612795760570581, -0.0063372247933737359),
    (-2.5960831150492022, 0.018085234254798453),
    (-1.7320508075688773, 0.064096054686807589),
    (-1.230423634027306, 0.061151730125247677),
    (-7.4109534999454084e-1, 0.20832499164960888),
    (0.0, 0.30346719985420587),
    (7.4109534999454084e-1, 0.20832499164960888),
    (1.230423634027306, 0.061151730125247677),
    (1.7320508075688773, 0.064096054686807589),
    (2.5960831150492022, 0.018085234254798453),
    (2.8612795760570581, -0.0063372247933737359),
    (3.2053337944991945, 0.0028848804365067513),
    (4.1849560176727319, 6.0123369459847818e-5),
    (5.1870160399136561, 6.0948087314689835e-7),
    (6.36339449433637, 8.6296846022298858e-10),
];
const GK35: [(f64, f64); 35] = [
    (-9.0169397898903025, 1.0541326582333341e-18),
    (-7.9807717985905609, 5.4500412650636899e-15),
    (-7.1221067008046167, 3.0972223576063162e-12),
    (-6.36339449433637, 4.6011760348656187e-10),
    (-5.6981777684881096, 2.1394194479561106e-8),
    (-5.1870160399136561, 2.4676421345798079e-7),
    (-4.7364330859522971, 2.734220680118783e-6),
    (-4.1849560176727319, 3.57293481989751e-5),
    (-3.6353185190372782, 0.00027524214116785157),
    (-3.2053337944991945, 0.00081895392750226491),
    (-2.8612795760570581, 0.0023113452403522101),
    (-2.5960831150492022, 0.0031554462691875638),
    (-2.2336260616769417, 0.015673473751851152),
    (-1.7320508075688773, 0.045273685465150516),
    (-1.230423634027306, 0.092364726716986306),
    (-7.4109534999454084e-1, 0.14807083115521601),
    (-2.4899229757996061e-1, 0.19176011588804443),
    (0.0, 0.00051489450806878429),
    (2.4899229757996061e-1, 0.19176011588804443),
    (7.4109534999454084e-1, 0.14807083115521601),
    (1.230423634027306, 0.092364726716986306),
    (1.7320508075688773, 0.045273685465150516),
    (2.2336260616769417, 0.015673473751851152),
    (2.5960831150492022, 0.0031554462691875638),
    (2.8612795760570581, 0.0023113452403522101),
    (3.2053337944991945, 0.00081895392750226491),
    (3.6353185190372782, 0.00027524214116785157),
    (4.1849560176727319, 3.57293481989751e-5),
    (4.7364330859522971, 2.734220680118783e-6),
    (5.1870160399136561, 2.4676421345798079e-7),
    (5.6981777684881096, 2.1394194479561106e-8),
    (6.36339449433637, 4.6011760348656187e-10),
    (7.1221067008046167, 3.0972223576063162e-12),
    (7.9807717985905609, 5.4500412650636899e-15),
    (9.0169397898903025, 1.0541326582333341e-18),
];
