//! Seeded synthetic road scenes: a dark textured road trapezoid on a
//! brighter background, optionally with bright car rectangles on the road.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::annotation::{AnnotatedObject, FrameAnnotation, ObjectClass, Point, Polygon};
use crate::dataset::{save_dataset, DatasetError};
use crate::imaging::GrayImage;
use crate::sampler::{frame_seed, seeded_rng};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene parameters: {0}")]
    InvalidParams(String),
    #[error("road polygon is not a simple polygon inside the {width}x{height} frame")]
    RoadOutsideFrame { width: usize, height: usize },
    #[error("could not place a {w}x{h} car inside the road")]
    CarDoesNotFit { w: usize, h: usize },
    #[error("corpus needs at least one frame")]
    EmptyCorpus,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    /// Road corners in order: bottom-left, bottom-right, top-right, top-left.
    pub road: [Point; 4],
    pub road_mean: f64,
    pub background_mean: f64,
    pub car_mean: f64,
    /// Peak deviation of the fine-grained road texture.
    pub road_texture: f64,
    /// Peak deviation of the coarse background texture.
    pub background_texture: f64,
    pub car_count: usize,
    /// Inclusive range of car side lengths in pixels.
    pub car_size: (usize, usize),
    /// Peak per-pixel uniform noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 640,
            height: 480,
            road: [
                Point::new(100.0, 480.0),
                Point::new(540.0, 480.0),
                Point::new(350.0, 230.0),
                Point::new(290.0, 230.0),
            ],
            road_mean: 90.0,
            background_mean: 160.0,
            car_mean: 210.0,
            road_texture: 8.0,
            background_texture: 30.0,
            car_count: 1,
            car_size: (24, 48),
            noise: 6.0,
            seed: 0,
        }
    }
}

/// Attempts per car before giving up.
const CAR_ATTEMPTS: usize = 1000;

impl SceneParams {
    pub fn road_polygon(&self) -> Polygon {
        Polygon::new(self.road.to_vec()).expect("four vertices")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::InvalidParams("frame size must be positive".into()));
        }
        for (name, v) in [
            ("road_mean", self.road_mean),
            ("background_mean", self.background_mean),
            ("car_mean", self.car_mean),
        ] {
            if !(0.0..=255.0).contains(&v) {
                return Err(SynthError::InvalidParams(format!("{name} {v} outside [0, 255]")));
            }
        }
        for (name, v) in [
            ("road_texture", self.road_texture),
            ("background_texture", self.background_texture),
            ("noise", self.noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidParams(format!("{name} must be finite and non-negative")));
            }
        }
        let (lo, hi) = self.car_size;
        if lo == 0 || lo > hi {
            return Err(SynthError::InvalidParams(format!("car size range {lo}..={hi}")));
        }
        let in_frame = self
            .road
            .iter()
            .all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width as f64 && p.y <= self.height as f64);
        if !in_frame || !self.road_polygon().is_simple() {
            return Err(SynthError::RoadOutsideFrame {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }
}

/// Bilinearly interpolated lattice noise in [-1, 1].
struct ValueNoise {
    cell: usize,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> ValueNoise {
        let cols = width / cell + 2;
        let rows = height / cell + 2;
        let lattice = (0..cols * rows).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        ValueNoise { cell, cols, lattice }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        let (cx, cy) = (x / self.cell, y / self.cell);
        let fx = (x % self.cell) as f64 / self.cell as f64;
        let fy = (y % self.cell) as f64 / self.cell as f64;
        let v = |i: usize, j: usize| self.lattice[j * self.cols + i];
        let top = v(cx, cy) * (1.0 - fx) + v(cx + 1, cy) * fx;
        let bottom = v(cx, cy + 1) * (1.0 - fx) + v(cx + 1, cy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn to_sample(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn place_car(
    road: &Polygon,
    params: &SceneParams,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize, usize, usize), SynthError> {
    let (lo, hi) = params.car_size;
    let w = rng.gen_range(lo..=hi);
    let h = rng.gen_range(lo..=hi);
    if w > params.width || h > params.height {
        return Err(SynthError::CarDoesNotFit { w, h });
    }
    for _ in 0..CAR_ATTEMPTS {
        let x = rng.gen_range(0..=params.width - w);
        let y = rng.gen_range(0..=params.height - h);
        let (x0, y0, x1, y1) = (x as f64, y as f64, (x + w) as f64, (y + h) as f64);
        // The road is convex, so four corners inside means the whole car is.
        let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
        if corners.iter().all(|&(cx, cy)| road.contains(Point::new(cx, cy))) {
            return Ok((x, y, w, h));
        }
    }
    Err(SynthError::CarDoesNotFit { w, h })
}

/// Renders one scene. Pixels whose centre lies inside the road polygon get
/// road brightness; cars are painted over the road.
pub fn generate_scene(params: &SceneParams, frame_id: &str) -> Result<(GrayImage, FrameAnnotation), SynthError> {
    params.validate()?;
    let mut rng = seeded_rng(params.seed);
    let road = params.road_polygon();
    let (w, h) = (params.width, params.height);

    let road_tex = ValueNoise::new(w, h, 3, &mut rng);
    let bg_tex = ValueNoise::new(w, h, 24, &mut rng);

    let mut cars = Vec::with_capacity(params.car_count);
    for _ in 0..params.car_count {
        cars.push(place_car(&road, params, &mut rng)?);
    }

    let mut samples = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let centre = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let in_car = cars
                .iter()
                .any(|&(cx, cy, cw, ch)| x >= cx && x < cx + cw && y >= cy && y < cy + ch);
            let mut v = if in_car {
                params.car_mean
            } else if road.contains(centre) {
                params.road_mean + params.road_texture * road_tex.at(x, y)
            } else {
                params.background_mean + params.background_texture * bg_tex.at(x, y)
            };
            if params.noise > 0.0 {
                v += rng.gen_range(-params.noise..=params.noise);
            }
            samples.push(to_sample(v));
        }
    }
    let image = GrayImage::new(w, h, samples).expect("sample count matches");

    let mut objects = vec![AnnotatedObject {
        class: ObjectClass::Road,
        polygon: road,
    }];
    for (cx, cy, cw, ch) in cars {
        let (x0, y0, x1, y1) = (cx as f64, cy as f64, (cx + cw) as f64, (cy + ch) as f64);
        objects.push(AnnotatedObject {
            class: ObjectClass::Car,
            polygon: Polygon::new(vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ])
            .expect("four vertices"),
        });
    }
    let annotation = FrameAnnotation {
        frame_id: frame_id.to_string(),
        image_ref: format!("{frame_id}.pgm"),
        width: w,
        height: h,
        objects,
    };
    Ok((image, annotation))
}

/// Ranges scene parameters are drawn from, per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRanges {
    pub width: usize,
    pub height: usize,
    /// Row of the road's top edge.
    pub horizon: (f64, f64),
    pub bottom_width: (f64, f64),
    pub top_width: (f64, f64),
    /// Horizontal offset of the road centre from the frame centre.
    pub shift: (f64, f64),
    pub road_mean: (f64, f64),
    pub background_mean: (f64, f64),
    pub car_mean: (f64, f64),
    pub road_texture: (f64, f64),
    pub background_texture: (f64, f64),
    pub car_count: (usize, usize),
    pub car_size: (usize, usize),
    pub noise: (f64, f64),
}

impl Default for SceneRanges {
    fn default() -> Self {
        SceneRanges {
            width: 640,
            height: 480,
            horizon: (200.0, 270.0),
            bottom_width: (320.0, 560.0),
            top_width: (30.0, 90.0),
            shift: (-40.0, 40.0),
            road_mean: (70.0, 125.0),
            background_mean: (95.0, 175.0),
            car_mean: (150.0, 230.0),
            road_texture: (4.0, 12.0),
            background_texture: (25.0, 50.0),
            car_count: (0, 2),
            car_size: (24, 48),
            noise: (3.0, 8.0),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

impl SceneRanges {
    /// Scene parameters for one frame, fully determined by `seed`.
    pub fn sample(&self, seed: u64) -> SceneParams {
        let mut rng = seeded_rng(seed);
        let (w, h) = (self.width as f64, self.height as f64);
        let horizon = draw(&mut rng, self.horizon).clamp(0.0, h);
        let shift = draw(&mut rng, self.shift);
        let half_bottom = draw(&mut rng, self.bottom_width) / 2.0;
        let half_top = draw(&mut rng, self.top_width) / 2.0;
        let centre = w / 2.0 + shift;
        let clamp_x = |x: f64| x.round().clamp(0.0, w);
        let road = [
            Point::new(clamp_x(centre - half_bottom), h),
            Point::new(clamp_x(centre + half_bottom), h),
            Point::new(clamp_x(centre + half_top), horizon.round()),
            Point::new(clamp_x(centre - half_top), horizon.round()),
        ];
        let (clo, chi) = self.car_count;
        SceneParams {
            width: self.width,
            height: self.height,
            road,
            road_mean: draw(&mut rng, self.road_mean),
            background_mean: draw(&mut rng, self.background_mean),
            car_mean: draw(&mut rng, self.car_mean),
            road_texture: draw(&mut rng, self.road_texture),
            background_texture: draw(&mut rng, self.background_texture),
            car_count: rng.gen_range(clo..=chi.max(clo)),
            car_size: self.car_size,
            noise: draw(&mut rng, self.noise),
            seed: rng.gen(),
        }
    }
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}")
}

/// Generates `n` frames in memory. Frame `i` depends only on `master_seed`
/// and its name.
pub fn generate_frames(
    n: usize,
    master_seed: u64,
    ranges: &SceneRanges,
) -> Result<Vec<(FrameAnnotation, GrayImage)>, SynthError> {
    if n == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    (0..n)
        .map(|i| {
            let name = frame_name(i);
            let params = ranges.sample(frame_seed(master_seed, &name));
            generate_scene(&params, &name).map(|(img, ann)| (ann, img))
        })
        .collect()
}

/// Writes `frame_NNNNN.pgm` files and `annotations.xml` into `dir`.
pub fn generate_corpus(
    dir: &Path,
    n: usize,
    master_seed: u64,
    ranges: &SceneRanges,
) -> Result<Vec<FrameAnnotation>, SynthError> {
    let frames = generate_frames(n, master_seed, ranges)?;
    save_dataset(dir, &frames)?;
    Ok(frames.into_iter().map(|(a, _)| a).collect())
}
