//! Candidate-box selection for a single frame and lower-boundary extension.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixels; `y` grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    #[serde(rename = "x")]
    pub x_min: f64,
    #[serde(rename = "y")]
    pub y_min: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, w: f64, h: f64, score: f64) -> Self {
        Self {
            x_min,
            y_min,
            w,
            h,
            score,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x_min + self.w / 2.0, self.y_min + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.w
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.h
    }

    /// Intersection with `[0, width] x [0, height]`, or `None` if empty.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x_min.max(0.0);
        let y0 = self.y_min.max(0.0);
        let x1 = self.x_max().min(width);
        let y1 = self.y_max().min(height);
        (x1 > x0 && y1 > y0).then(|| BBox::new(x0, y0, x1 - x0, y1 - y0, self.score))
    }

    fn fields(&self) -> [f64; 5] {
        [self.x_min, self.y_min, self.w, self.h, self.score]
    }

    /// Total order over all fields; used to make selection independent of input order.
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.fields()
            .iter()
            .zip(other.fields().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }
}

/// All candidate boxes reported for one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub index: u64,
    pub boxes: Vec<BBox>,
}

/// Which side of the road oncoming devices appear on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficSide {
    #[default]
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterRule {
    pub traffic_side: TrafficSide,
    /// Boxes with `y_min <= top_margin` are treated as touching the top edge.
    pub top_margin: f64,
}

impl Default for FilterRule {
    fn default() -> Self {
        Self {
            traffic_side: TrafficSide::Right,
            top_margin: 0.0,
        }
    }
}

/// Selects at most one device box from a frame's candidates.
///
/// Half the candidates on the far side of the road are discarded, then half of
/// the remainder lying lowest in the image, then every box touching the top
/// edge; the highest-scoring survivor wins (ties: larger area, then smaller
/// `x_min`). Boxes are clipped to the image before the rule is evaluated, but
/// the returned box is the original input.
pub fn filter_candidates(
    dets: &DetectionSet,
    image_w: usize,
    image_h: usize,
    rule: &FilterRule,
) -> Option<BBox> {
    let mut pool: Vec<(BBox, BBox)> = dets
        .boxes
        .iter()
        .filter_map(|b| b.clamp_to(image_w as f64, image_h as f64).map(|c| (*b, c)))
        .collect();
    // Canonical order first so that ties inside the sorts below are resolved
    // identically for any permutation of the input.
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));

    pool.sort_by(|a, b| a.1.center().0.total_cmp(&b.1.center().0));
    if rule.traffic_side == TrafficSide::Left {
        pool.reverse();
    }
    pool.drain(..pool.len() / 2);

    pool.sort_by(|a, b| b.1.center().1.total_cmp(&a.1.center().1));
    pool.drain(..pool.len() / 2);

    pool.retain(|(_, c)| c.y_min > rule.top_margin);

    pool.into_iter()
        .max_by(|a, b| {
            a.1.score
                .total_cmp(&b.1.score)
                .then(a.1.area().total_cmp(&b.1.area()))
                .then(b.1.x_min.total_cmp(&a.1.x_min))
                .then(b.0.total_cmp(&a.0))
        })
        .map(|(original, _)| original)
}

/// Pushes the lower boundary down by `extension` pixels, stopping at the image bottom.
pub fn extend_bbox(bbox: &BBox, extension: f64, image_h: usize) -> BBox {
    let room = image_h as f64 - bbox.y_min;
    let h = (bbox.h + extension.max(0.0)).min(room).max(bbox.h);
    BBox { h, ..*bbox }
}
