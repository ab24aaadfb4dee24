use std::io::Cursor;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use patchwarp::dataset::{load_dataset, Dataset};
use patchwarp::geometry::{orbit_viewpoint, ImageSize, SphericalPose};
use patchwarp::imaging::{flatten_over, image_size_of, resize_rgb, BACKGROUND};
use patchwarp::pipeline::{synthesize_view, BaselineBackend, Synthesis, SynthesisOptions};
use patchwarp::raster::VisibilityConfig;
use patchwarp::warp::PatchSpec;

use crate::error::{CliError, ErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    #[default]
    Composite,
    Sketch,
    Patches,
    All,
}

/// One render. Omitted angles and radius default to the sample's
/// annotated pose; an omitted `cad_id` to the sample's own CAD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub sample_id: String,
    #[serde(default)]
    pub cad_id: Option<u32>,
    #[serde(default)]
    pub azimuth_deg: Option<f64>,
    #[serde(default)]
    pub elevation_deg: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub output: Output,
}

impl RenderRequest {
    pub fn new(sample_id: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.into(),
            cad_id: None,
            azimuth_deg: None,
            elevation_deg: None,
            radius: None,
            backend: Backend::Baseline,
            output: Output::Composite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineOptions {
    pub size: u32,
    pub visibility: VisibilityConfig,
    pub symmetry: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            size: 128,
            visibility: VisibilityConfig::default(),
            symmetry: true,
        }
    }
}

/// A loaded dataset ready to render. Immutable after construction.
#[derive(Debug)]
pub struct Engine {
    pub dataset: Dataset,
    pub spec: PatchSpec,
    pub options: EngineOptions,
}

pub struct Rendered {
    pub synthesis: Synthesis,
    pub pose: SphericalPose,
    pub cad_id: u32,
}

impl Engine {
    /// Loads `root`, resizing every sample to the working size. `spec`
    /// overrides the class's built-in patch layout.
    pub fn load(root: &Path, spec: Option<&Path>, options: EngineOptions) -> Result<Self, CliError> {
        if options.size < 10 {
            return Err(CliError::invalid(format!("--size must be at least 10, got {}", options.size)));
        }
        let t = options.visibility.threshold;
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::invalid(format!("visibility threshold must be in [0, 1], got {t}")));
        }
        let mut dataset = load_dataset(root, None)?;
        for s in &dataset.skipped {
            log::warn!("skipped sample #{} ({:?}): {:?}", s.index, s.id, s.reason);
        }
        let spec = match spec {
            Some(path) => PatchSpec::load(path).map_err(|e| CliError::new(ErrorKind::Dataset, e.to_string()))?,
            None => PatchSpec::builtin(dataset.class()).ok_or_else(|| {
                CliError::new(
                    ErrorKind::Dataset,
                    format!("no built-in patch layout for class {:?}; pass --spec", dataset.class()),
                )
            })?,
        };
        let size = ImageSize::square(options.size);
        for s in &mut dataset.samples {
            if image_size_of(&s.image) != size {
                s.image = resize_rgb(&s.image, size);
            }
        }
        Ok(Self { dataset, spec, options })
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            visibility: self.options.visibility,
            symmetry: self.options.symmetry,
        }
    }

    pub fn render(&self, req: &RenderRequest) -> Result<Rendered, CliError> {
        let sample = self
            .dataset
            .sample(&req.sample_id)
            .ok_or_else(|| CliError::new(ErrorKind::SampleNotFound, format!("no sample {:?}", req.sample_id)))?;
        let cad_id = req.cad_id.unwrap_or(sample.cad_id);
        let cad = self
            .dataset
            .catalog
            .get(cad_id)
            .ok_or_else(|| CliError::new(ErrorKind::CadNotFound, format!("no cad {cad_id}")))?;
        let annotated = sample.view.spherical().ok();
        let pick = |v: Option<f64>, f: fn(&SphericalPose) -> f64, name: &str| {
            v.or(annotated.as_ref().map(f))
                .ok_or_else(|| CliError::invalid(format!("{name} is required for samples without an orbit pose")))
        };
        let pose = SphericalPose::new(
            pick(req.azimuth_deg, SphericalPose::azimuth_deg, "azimuth_deg")?,
            pick(req.elevation_deg, SphericalPose::elevation_deg, "elevation_deg")?,
            pick(req.radius, SphericalPose::radius, "radius")?,
        )?;
        let view = orbit_viewpoint(&pose)?;
        let Backend::Baseline = req.backend;
        let synthesis = synthesize_view(sample, &view, cad, &self.spec, &BaselineBackend, &self.synthesis_options())?;
        Ok(Rendered { synthesis, pose, cad_id })
    }
}

impl Rendered {
    /// The requested layer as an image; `All` is a composite | sketch |
    /// patches strip.
    pub fn layer(&self, output: Output) -> image::DynamicImage {
        let s = &self.synthesis;
        match output {
            Output::Composite => s.image.clone().into(),
            Output::Sketch => s.input.sketch.image.clone().into(),
            Output::Patches => s.input.patches.clone().into(),
            Output::All => {
                let (w, h) = s.image.dimensions();
                let patches = flatten_over(&s.input.patches, BACKGROUND);
                let mut strip = RgbImage::from_pixel(3 * w, h, Rgb([255, 255, 255]));
                for (i, img) in [&s.image, &s.input.sketch.image, &patches].into_iter().enumerate() {
                    image::imageops::replace(&mut strip, img, (i as u32 * w) as i64, 0);
                }
                strip.into()
            }
        }
    }

    pub fn prior(&self) -> image::DynamicImage {
        self.synthesis.input.prior.image.clone().into()
    }
}

pub fn encode_png(img: &image::DynamicImage) -> Result<Vec<u8>, CliError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}
