//! End-to-end fusion: rays → graph → MRF labeling → clusters → instances,
//! independently per object class.

use std::collections::BTreeSet;

use log::{debug, warn};

use crate::cluster::{agglomerate, split_by_pair_count, Cluster};
use crate::config::{CameraHeight, RunConfig};
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{haversine_distance, GeoPoint};
use crate::height::{
    calibrate_camera_height, populate_node_heights, single_view_height, CameraHeightCalibration, HeightEstimate,
};
use crate::mrf::MrfGraph;
use crate::qpbo::{from_mrf, solve_complete, Labeling};
use crate::survey::Survey;

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub class: String,
    pub position: GeoPoint,
    /// Distinct frames supporting the instance.
    pub view_count: usize,
    pub height: HeightEstimate,
}

/// Intermediate products of one class.
#[derive(Debug, Clone)]
pub struct ClassResult {
    pub graph: MrfGraph,
    pub labeling: Labeling,
    pub clusters: Vec<Cluster>,
    pub instances: Vec<ObjectInstance>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutput {
    pub instances: Vec<ObjectInstance>,
    /// Present when the camera height was calibrated during the run.
    pub calibration: Option<CameraHeightCalibration>,
}

/// Runs the full pipeline on one class of detections.
pub fn fuse_class(survey: &Survey, class: &str, config: &RunConfig) -> ClassResult {
    let graph = class_graph(survey, class, config.max_ray_distance);
    let (labeling, clusters, instances) = solve_graph(survey, &graph, config);
    ClassResult {
        graph,
        labeling,
        clusters,
        instances,
    }
}

fn class_graph(survey: &Survey, class: &str, max_ray_distance: f64) -> MrfGraph {
    let rays = survey.rays_for_class(class);
    let mut graph = MrfGraph::build(class, &rays, survey, max_ray_distance);
    populate_node_heights(&mut graph, survey);
    graph
}

fn solve_graph(survey: &Survey, graph: &MrfGraph, config: &RunConfig) -> (Labeling, Vec<Cluster>, Vec<ObjectInstance>) {
    let problem = from_mrf(graph, &config.weights());
    let labeling = solve_complete(&problem);
    let positive: Vec<usize> = (0..graph.len()).filter(|&i| labeling.labels[i] == Some(true)).collect();
    debug!(
        "{}: {} rays, {} nodes, {} pairs, {} positive",
        graph.class,
        graph.rays.len(),
        graph.len(),
        graph.pairs().len(),
        positive.len()
    );

    let mut clusters = agglomerate(graph, &positive, config.linkage_cutoff);
    if config.split_clusters {
        clusters = clusters.iter().flat_map(|c| split_by_pair_count(graph, c)).collect();
    }
    let instances = clusters
        .iter()
        .filter_map(|c| instance(survey, graph, c, config))
        .collect();
    (labeling, clusters, instances)
}

fn instance(survey: &Survey, graph: &MrfGraph, cluster: &Cluster, config: &RunConfig) -> Option<ObjectInstance> {
    let rays: BTreeSet<usize> = cluster.members.iter().flat_map(|&m| graph.nodes[m].rays).collect();
    let frames: BTreeSet<usize> = rays.iter().map(|&r| graph.rays[r].frame).collect();
    let mut per_view = Vec::with_capacity(rays.len());
    for &r in &rays {
        let det_index = graph.rays[r].detection;
        let frame = survey.frame_of(det_index);
        let d = haversine_distance(frame.position, cluster.center);
        match single_view_height(frame, &survey.detections()[det_index], d, config.pitch_mode) {
            Ok(h) => per_view.push((frame.image_id.clone(), h)),
            Err(e) => debug!("skipping view {}: {e}", frame.image_id),
        }
    }
    match HeightEstimate::aggregate(per_view) {
        Ok(height) => Some(ObjectInstance {
            class: graph.class.clone(),
            position: cluster.center,
            view_count: frames.len(),
            height,
        }),
        Err(_) => {
            warn!("dropping {} cluster with no usable views", graph.class);
            None
        }
    }
}

/// Survey with the camera-height policy applied and all class graphs built.
/// Reusable across runs that differ only in weights, cutoff or splitting.
#[derive(Debug, Clone)]
pub struct PreparedSurvey {
    survey: Survey,
    graphs: Vec<MrfGraph>,
    camera_height: CameraHeight,
    max_ray_distance: f64,
}

impl PreparedSurvey {
    pub fn new(survey: &Survey, config: &RunConfig) -> Self {
        let survey = match &config.camera_height {
            CameraHeight::Frames => survey.clone(),
            CameraHeight::Fixed(h) => survey.with_camera_height(*h),
            CameraHeight::CalibrateFromClass(_) => survey.with_camera_height(0.0),
        };
        let classes = survey.classes();
        let graphs = exec::map(config.execution, &classes, |class| {
            class_graph(&survey, class, config.max_ray_distance)
        });
        Self {
            survey,
            graphs,
            camera_height: config.camera_height.clone(),
            max_ray_distance: config.max_ray_distance,
        }
    }

    pub fn graphs(&self) -> &[MrfGraph] {
        &self.graphs
    }

    /// Finishes the pipeline under `config`, whose camera-height policy and
    /// ray cutoff must match the ones used for preparation.
    pub fn run(&self, config: &RunConfig) -> Result<PipelineOutput> {
        config.validate()?;
        if config.camera_height != self.camera_height || config.max_ray_distance != self.max_ray_distance {
            return Err(Error::Config(vec![
                "camera_height and max_ray_distance must match the prepared survey".into(),
            ]));
        }
        let instances: Vec<ObjectInstance> = exec::map(config.execution, &self.graphs, |g| {
            solve_graph(&self.survey, g, config).2
        })
        .into_iter()
        .flatten()
        .collect();
        let CameraHeight::CalibrateFromClass(label) = &config.camera_height else {
            return Ok(PipelineOutput {
                instances,
                calibration: None,
            });
        };
        let ground: Vec<ObjectInstance> = instances.iter().filter(|o| &o.class == label).cloned().collect();
        if ground.is_empty() {
            return Err(Error::CalibrationUnavailable(format!("no instances of class `{label}`")));
        }
        let calibration = calibrate_camera_height(&ground)?;
        let instances = instances
            .into_iter()
            .map(|o| ObjectInstance {
                height: o.height.shifted(calibration.mean_based),
                ..o
            })
            .collect();
        Ok(PipelineOutput {
            instances,
            calibration: Some(calibration),
        })
    }
}

/// Geolocates and sizes every object in the survey. Instances are grouped by
/// class in sorted class order.
pub fn run_pipeline(survey: &Survey, config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    PreparedSurvey::new(survey, config).run(config)
}
