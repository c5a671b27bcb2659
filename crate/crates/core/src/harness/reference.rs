//! Published reference numbers for the style-transfer benchmark.
//!
//! These are fixtures for rendering and round-trip checks only. They were
//! produced with full diffusion, captioning and language-model stacks and
//! cannot be reproduced by this crate.

use super::grid::{BenchGrid, MetricCell};
use super::report::SummaryRow;
use crate::dataset::{ExclusionMask, StyleId};

pub const IMAGE_DRIVEN_METHODS: [&str; 5] = ["Ours", "Avatar", "AdaIn", "Artflow", "styTR"];
pub const TEXT_DRIVEN_METHODS: [&str; 5] = ["Ours", "styleCLIP", "CLIPstyler", "TextInversion(SD)", "Dreambooth(SD)"];

const IMAGE_DRIVEN_TARGETS: [StyleId; 5] = [
    StyleId::RealisticOil,
    StyleId::Abstract,
    StyleId::InkPainting,
    StyleId::Impression,
    StyleId::Anime,
];

// [metric][target][method]; metric order sml, cms, fid, clips.
type Block = [[[f64; 5]; 5]; 4];

const INK: Block = [
    [
        [6.56, 7.72, 7.15, 6.91, 5.72],
        [5.01, 8.06, 9.62, 6.18, 7.45],
        [0.0; 5],
        [7.23, 6.38, 7.96, 8.01, 6.12],
        [6.95, 6.83, 7.21, 6.55, 5.97],
    ],
    [
        [0.813, 0.325, 0.245, 0.357, 0.163],
        [0.315, 0.132, 0.095, 0.119, 0.217],
        [0.0; 5],
        [0.678, 0.275, 0.193, 0.326, 0.242],
        [0.484, 0.254, 0.140, 0.239, 0.384],
    ],
    [
        [14.48, 17.61, 16.32, 16.73, 15.41],
        [18.35, 22.78, 21.31, 19.98, 20.64],
        [0.0; 5],
        [16.91, 18.73, 17.82, 14.55, 15.76],
        [15.43, 25.00, 14.99, 18.76, 22.32],
    ],
    [
        [24.37, 23.98, 24.12, 25.72, 23.41],
        [24.11, 19.54, 18.96, 19.12, 18.74],
        [0.0; 5],
        [26.98, 23.57, 23.61, 21.73, 20.73],
        [23.41, 26.73, 25.66, 26.45, 24.56],
    ],
];

const PHOTO: Block = [
    [
        [6.87, 5.48, 6.01, 6.27, 4.75],
        [6.99, 8.35, 9.15, 7.92, 8.63],
        [4.82, 5.91, 5.25, 6.41, 5.37],
        [7.74, 6.42, 8.62, 6.17, 5.86],
        [6.31, 5.27, 6.29, 5.88, 6.16],
    ],
    [
        [0.672, 0.817, 0.625, 0.752, 0.801],
        [0.432, 0.527, 0.641, 0.146, 0.599],
        [0.514, 0.468, 0.385, 0.548, 0.624],
        [0.753, 0.519, 0.456, 0.620, 0.572],
        [0.581, 0.622, 0.196, 0.426, 0.728],
    ],
    [
        [16.90, 16.21, 20.78, 18.89, 24.98],
        [19.21, 26.56, 26.34, 22.12, 23.90],
        [15.67, 22.09, 20.89, 19.32, 16.25],
        [17.98, 26.78, 16.78, 16.21, 14.78],
        [18.32, 21.92, 21.33, 15.43, 17.43],
    ],
    [
        [29.68, 27.43, 28.75, 23.45, 28.69],
        [28.43, 20.78, 22.94, 21.11, 21.39],
        [29.41, 23.3, 22.71, 20.19, 22.49],
        [28.89, 26.77, 24.59, 26.21, 23.99],
        [27.33, 28.93, 26.43, 24.86, 25.52],
    ],
];

const ANIME: Block = [
    [
        [6.41, 8.26, 7.77, 6.92, 7.12],
        [6.48, 10.01, 9.87, 8.51, 9.66],
        [5.52, 8.91, 9.03, 7.84, 6.69],
        [5.76, 6.71, 8.30, 6.72, 5.42],
        [0.0; 5],
    ],
    [
        [0.519, 0.451, 0.426, 0.525, 0.539],
        [0.432, 0.513, 0.289, 0.371, 0.106],
        [0.686, 0.364, 0.239, 0.181, 0.524],
        [0.586, 0.653, 0.327, 0.274, 0.295],
        [0.0; 5],
    ],
    [
        [15.79, 18.91, 19.32, 15.22, 14.76],
        [19.32, 19.23, 16.78, 22.45, 20.89],
        [18.91, 24.12, 23.56, 21.01, 19.24],
        [14.10, 22.67, 23.12, 19.21, 15.67],
        [0.0; 5],
    ],
    [
        [26.53, 24.56, 26.87, 25.43, 24.66],
        [29.09, 21.35, 22.04, 20.68, 21.16],
        [28.76, 21.45, 24.33, 23.34, 22.07],
        [29.47, 27.33, 26.42, 27.32, 25.88],
        [0.0; 5],
    ],
];

// photo input; targets realistic-oil, impression, anime.
const TEXT_DRIVEN: [[[f64; 5]; 3]; 4] = [
    [
        [6.87, 7.23, 8.92, 7.63, 6.25],
        [7.74, 7.77, 9.67, 7.42, 5.98],
        [6.31, 7.56, 8.48, 5.98, 8.2],
    ],
    [
        [0.67, 0.37, 0.57, 0.30, 0.31],
        [0.75, 0.51, 0.38, 0.58, 0.22],
        [0.58, 0.44, 0.40, 0.38, 0.34],
    ],
    [
        [16.90, 18.58, 19.21, 19.21, 19.99],
        [17.98, 19.49, 21.63, 19.19, 21.42],
        [18.32, 20.49, 30.17, 20.04, 20.9],
    ],
    [
        [29.68, 21.36, 20.01, 25.92, 26.15],
        [28.89, 20.82, 17.69, 24.52, 27.56],
        [27.33, 20.04, 20.74, 23.42, 25.52],
    ],
];

fn fill<const T: usize>(
    grid: &mut BenchGrid,
    input: StyleId,
    targets: &[StyleId; T],
    methods: &[&str; 5],
    block: &[[[f64; 5]; T]; 4],
) {
    for (ti, &target) in targets.iter().enumerate() {
        if target == input {
            continue;
        }
        for (mi, method) in methods.iter().enumerate() {
            let cell = MetricCell::scored(block[0][ti][mi], block[1][ti][mi], block[2][ti][mi], block[3][ti][mi]);
            grid.set_cell(input, target, method, cell)
                .expect("reference cells are not excluded");
        }
    }
}

/// Image-driven comparison: ink painting, photo and anime inputs against
/// five target styles. Identity pairs are excluded.
pub fn image_driven_grid() -> BenchGrid {
    let inputs = vec![StyleId::InkPainting, StyleId::Photo, StyleId::Anime];
    let mut grid = BenchGrid::new(
        inputs,
        IMAGE_DRIVEN_TARGETS.to_vec(),
        IMAGE_DRIVEN_METHODS.iter().map(|m| m.to_string()).collect(),
        &ExclusionMask::default(),
    );
    for (input, block) in [
        (StyleId::InkPainting, &INK),
        (StyleId::Photo, &PHOTO),
        (StyleId::Anime, &ANIME),
    ] {
        fill(&mut grid, input, &IMAGE_DRIVEN_TARGETS, &IMAGE_DRIVEN_METHODS, block);
    }
    grid
}

/// Text-driven and multi-conditional comparison on photo inputs.
pub fn text_driven_grid() -> BenchGrid {
    let targets = [StyleId::RealisticOil, StyleId::Impression, StyleId::Anime];
    let mut grid = BenchGrid::new(
        vec![StyleId::Photo],
        targets.to_vec(),
        TEXT_DRIVEN_METHODS.iter().map(|m| m.to_string()).collect(),
        &ExclusionMask::default(),
    );
    fill(&mut grid, StyleId::Photo, &targets, &TEXT_DRIVEN_METHODS, &TEXT_DRIVEN);
    grid
}

/// Published per-method averages across the benchmark.
pub fn summary_table() -> Vec<SummaryRow> {
    vec![
        SummaryRow::new("Avatar", 7.25, 0.46, 21.74, 24.29),
        SummaryRow::new("AdaIn", 7.86, 0.33, 19.95, 24.42),
        SummaryRow::new("Artflow", 6.95, 0.38, 18.45, 23.52),
        SummaryRow::new("styTR", 6.53, 0.45, 18.62, 23.33),
        SummaryRow::new("styleCLIP", 7.52, 0.44, 19.50, 20.74),
        SummaryRow::new("CLIPstyler", 8.39, 0.45, 23.67, 19.48),
        SummaryRow::new("TextInversion", 7.01, 0.42, 18.38, 24.92),
        SummaryRow::new("Dreambooth", 6.81, 0.29, 20.77, 26.41),
        SummaryRow::new("Ours", 6.36, 0.57, 17.03, 27.42),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ink_to_oil_cell() {
        let g = image_driven_grid();
        let c = g.cell(StyleId::InkPainting, StyleId::RealisticOil, "Ours").unwrap();
        assert_eq!(*c, MetricCell::scored(6.56, 0.813, 14.48, 24.37));
        assert!(
            g.cell(StyleId::InkPainting, StyleId::InkPainting, "styTR")
                .unwrap()
                .excluded
        );
        assert!(g.cell(StyleId::Anime, StyleId::Anime, "Ours").unwrap().excluded);
    }

    #[test]
    fn every_other_cell_scored() {
        for g in [image_driven_grid(), text_driven_grid()] {
            for ((i, t, _), c) in g.cells() {
                assert_eq!(c.excluded, i == t);
                assert_eq!(c.sml.is_some(), i != t);
            }
        }
    }

    #[test]
    fn text_driven_spot_check() {
        let g = text_driven_grid();
        let c = g.cell(StyleId::Photo, StyleId::Anime, "CLIPstyler").unwrap();
        assert_eq!(*c, MetricCell::scored(8.48, 0.40, 30.17, 20.74));
    }
}
