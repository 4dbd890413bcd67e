//! Temporal completion of the per-frame device box.
//!
//! Anchor frames carry a box chosen by the detection filter; every frame
//! between two consecutive anchors is filled by a [`Tracker`] that is
//! (re)initialised at the earlier anchor.

use std::collections::{BTreeMap, BTreeSet};

use crate::detection::BBox;
use crate::error::{Error, Result};

/// Grayscale image, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl IntensityImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::Config(format!(
                "intensity grid has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, value: f32) {
        self.data[v * self.width + u] = value;
    }
}

/// What a tracker may look at for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub index: u64,
    pub intensity: Option<&'a IntensityImage>,
}

/// Loads a frame's intensity image on demand; `None` when the frame has none.
pub trait IntensitySource {
    fn intensity(&self, frame: u64) -> Result<Option<IntensityImage>>;
}

/// Source for sequences that carry no images.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoImages;

impl IntensitySource for NoImages {
    fn intensity(&self, _frame: u64) -> Result<Option<IntensityImage>> {
        Ok(None)
    }
}

impl IntensitySource for BTreeMap<u64, IntensityImage> {
    fn intensity(&self, frame: u64) -> Result<Option<IntensityImage>> {
        Ok(self.get(&frame).cloned())
    }
}

/// A gap between two consecutive anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_frame: u64,
    pub start: BBox,
    pub end_frame: u64,
    pub end: BBox,
}

pub trait Tracker {
    /// Starts a new segment at its first anchor frame.
    fn init(&mut self, frame: &FrameView<'_>, segment: &Segment) -> Result<()>;

    /// Box for the next frame of the current segment.
    fn step(&mut self, frame: &FrameView<'_>) -> Result<BBox>;
}

/// Gap-filled boxes over `[first_anchor, last_anchor]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackedSequence {
    pub entries: BTreeMap<u64, BBox>,
    pub anchors: BTreeSet<u64>,
}

impl TrackedSequence {
    pub fn get(&self, frame: u64) -> Option<&BBox> {
        self.entries.get(&frame)
    }

    pub fn is_anchor(&self, frame: u64) -> bool {
        self.anchors.contains(&frame)
    }
}

/// Fills every frame between consecutive anchors using `tracker`.
///
/// `frames` lists the sequence's frame indices in increasing order and must
/// contain every anchor. Frames before the first and after the last anchor
/// receive no box.
pub fn fill_gaps(
    anchors: &BTreeMap<u64, BBox>,
    frames: &[u64],
    images: &dyn IntensitySource,
    tracker: &mut dyn Tracker,
) -> Result<TrackedSequence> {
    if anchors.is_empty() {
        return Err(Error::NoDevice);
    }
    let position = |frame: u64| {
        frames
            .binary_search(&frame)
            .map_err(|_| Error::Config(format!("anchor frame {frame} is not in the sequence")))
    };
    let mut seq = TrackedSequence::default();
    for (&frame, bbox) in anchors {
        position(frame)?;
        seq.entries.insert(frame, *bbox);
        seq.anchors.insert(frame);
    }
    for ((&k0, b0), (&k1, b1)) in anchors.iter().zip(anchors.iter().skip(1)) {
        let (p0, p1) = (position(k0)?, position(k1)?);
        if p1 - p0 < 2 {
            continue;
        }
        let segment = Segment {
            start_frame: k0,
            start: *b0,
            end_frame: k1,
            end: *b1,
        };
        let image = images.intensity(k0)?;
        tracker.init(
            &FrameView {
                index: k0,
                intensity: image.as_ref(),
            },
            &segment,
        )?;
        for &index in &frames[p0 + 1..p1] {
            let image = images.intensity(index)?;
            let bbox = tracker.step(&FrameView {
                index,
                intensity: image.as_ref(),
            })?;
            seq.entries.insert(index, bbox);
        }
    }
    Ok(seq)
}

/// Interpolates each box coordinate linearly between the segment's anchors.
#[derive(Debug, Clone, Default)]
pub struct LinearInterpolationTracker {
    segment: Option<Segment>,
}

pub fn linear_interpolation_tracker() -> LinearInterpolationTracker {
    LinearInterpolationTracker::default()
}

pub(crate) fn lerp_box(segment: &Segment, frame: u64) -> BBox {
    if frame <= segment.start_frame {
        return segment.start;
    }
    if frame >= segment.end_frame {
        return segment.end;
    }
    let t = (frame - segment.start_frame) as f64 / (segment.end_frame - segment.start_frame) as f64;
    let mix = |a: f64, b: f64| a + (b - a) * t;
    let (a, b) = (&segment.start, &segment.end);
    BBox::new(
        mix(a.x_min, b.x_min),
        mix(a.y_min, b.y_min),
        mix(a.w, b.w),
        mix(a.h, b.h),
        mix(a.score, b.score),
    )
}

impl Tracker for LinearInterpolationTracker {
    fn init(&mut self, _frame: &FrameView<'_>, segment: &Segment) -> Result<()> {
        self.segment = Some(*segment);
        Ok(())
    }

    fn step(&mut self, frame: &FrameView<'_>) -> Result<BBox> {
        let segment = self
            .segment
            .as_ref()
            .ok_or_else(|| Error::TrackerUnavailable("tracker stepped before init".into()))?;
        Ok(lerp_box(segment, frame.index))
    }
}

/// Integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x: i64,
    y: i64,
    w: usize,
    h: usize,
}

#[derive(Debug, Clone)]
struct NccState {
    bbox: BBox,
    rect: Rect,
    template: Vec<f32>,
}

/// Normalised cross-correlation template matcher.
///
/// The template is the previous box crop padded by a small context margin.
/// Each step scans integer offsets in a `(2r+1)^2` window and moves the box
/// to the correlation peak, refreshing the template. When the peak is below
/// the acceptance threshold the box stays put.
#[derive(Debug, Clone)]
pub struct NccTemplateTracker {
    pub search_radius: usize,
    pub min_correlation: f64,
    pub context_px: usize,
    state: Option<NccState>,
}

pub fn ncc_template_tracker(search_radius: usize) -> NccTemplateTracker {
    NccTemplateTracker::new(search_radius, 0.5)
}

impl NccTemplateTracker {
    pub fn new(search_radius: usize, min_correlation: f64) -> Self {
        Self {
            search_radius,
            min_correlation,
            context_px: 4,
            state: None,
        }
    }

    fn template_rect(&self, bbox: &BBox, image: &IntensityImage) -> Result<Rect> {
        let c = self.context_px as i64;
        let x0 = (bbox.x_min.round() as i64 - c).max(0);
        let y0 = (bbox.y_min.round() as i64 - c).max(0);
        let x1 = (bbox.x_max().round() as i64 + c).min(image.width as i64);
        let y1 = (bbox.y_max().round() as i64 + c).min(image.height as i64);
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::TrackerUnavailable(
                "box lies outside the image".into(),
            ));
        }
        Ok(Rect {
            x: x0,
            y: y0,
            w: (x1 - x0) as usize,
            h: (y1 - y0) as usize,
        })
    }

    fn crop(image: &IntensityImage, rect: &Rect) -> Vec<f32> {
        let mut out = Vec::with_capacity(rect.w * rect.h);
        for v in 0..rect.h {
            let row = (rect.y as usize + v) * image.width + rect.x as usize;
            out.extend_from_slice(&image.data[row..row + rect.w]);
        }
        out
    }
}

fn intensity<'a>(frame: &FrameView<'a>) -> Result<&'a IntensityImage> {
    frame.intensity.ok_or_else(|| {
        Error::TrackerUnavailable(format!("frame {} has no intensity image", frame.index))
    })
}

/// NCC between `template` and the equally sized window of `image` at `rect`;
/// zero when either side has no variance.
fn ncc(template: &[f32], image: &IntensityImage, rect: &Rect) -> f64 {
    let n = template.len() as f64;
    let t_mean = template.iter().map(|&t| f64::from(t)).sum::<f64>() / n;
    let mut i_sum = 0.0;
    for v in 0..rect.h {
        let row = (rect.y as usize + v) * image.width + rect.x as usize;
        i_sum += image.data[row..row + rect.w]
            .iter()
            .map(|&p| f64::from(p))
            .sum::<f64>();
    }
    let i_mean = i_sum / n;
    let (mut cross, mut tt, mut ii) = (0.0, 0.0, 0.0);
    for v in 0..rect.h {
        let row = (rect.y as usize + v) * image.width + rect.x as usize;
        let window = &image.data[row..row + rect.w];
        let tpl = &template[v * rect.w..(v + 1) * rect.w];
        for (&p, &t) in window.iter().zip(tpl) {
            let di = f64::from(p) - i_mean;
            let dt = f64::from(t) - t_mean;
            cross += di * dt;
            tt += dt * dt;
            ii += di * di;
        }
    }
    let denom = (tt * ii).sqrt();
    if denom <= 1e-12 * n {
        0.0
    } else {
        cross / denom
    }
}

impl Tracker for NccTemplateTracker {
    fn init(&mut self, frame: &FrameView<'_>, segment: &Segment) -> Result<()> {
        let image = intensity(frame)?;
        let rect = self.template_rect(&segment.start, image)?;
        self.state = Some(NccState {
            bbox: segment.start,
            rect,
            template: Self::crop(image, &rect),
        });
        Ok(())
    }

    fn step(&mut self, frame: &FrameView<'_>) -> Result<BBox> {
        let image = intensity(frame)?;
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::TrackerUnavailable("tracker stepped before init".into()))?;
        let r = self.search_radius as i64;
        let base = state.rect;
        let mut best: Option<(f64, i64, i64)> = None;
        for dy in -r..=r {
            for dx in -r..=r {
                let cand = Rect {
                    x: base.x + dx,
                    y: base.y + dy,
                    ..base
                };
                if cand.x < 0
                    || cand.y < 0
                    || cand.x as usize + cand.w > image.width
                    || cand.y as usize + cand.h > image.height
                {
                    continue;
                }
                let score = ncc(&state.template, image, &cand);
                let better = match best {
                    None => true,
                    Some((s, bx, by)) => {
                        score > s + 1e-12
                            || ((score - s).abs() <= 1e-12
                                && dx.abs() + dy.abs() < bx.abs() + by.abs())
                    }
                };
                if better {
                    best = Some((score, dx, dy));
                }
            }
        }
        match best {
            Some((score, dx, dy)) if score >= self.min_correlation => {
                let moved = BBox {
                    x_min: state.bbox.x_min + dx as f64,
                    y_min: state.bbox.y_min + dy as f64,
                    ..state.bbox
                };
                let rect = Rect {
                    x: base.x + dx,
                    y: base.y + dy,
                    ..base
                };
                state.template = Self::crop(image, &rect);
                state.rect = rect;
                state.bbox = moved;
                Ok(moved)
            }
            _ => Ok(state.bbox),
        }
    }
}
