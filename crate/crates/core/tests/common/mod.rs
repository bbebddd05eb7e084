#![allow(dead_code)]

use streetgeo::sim::{NoiseModel, Scene, SceneObject, SceneSpec};
use streetgeo::Survey;

pub fn survey(scene: &Scene) -> Survey {
    Survey::new(scene.frames.clone(), scene.detections.clone()).expect("simulated scenes are valid")
}

/// Two drains 1.5 m apart, both seen by the same three forward-facing frames.
pub fn twin_drains() -> SceneSpec {
    let mut spec = SceneSpec {
        street_length: 6.0,
        views_per_point: 1,
        camera_pitch_spread: 0.0,
        noise: NoiseModel::none(),
        ..SceneSpec::default()
    };
    for right in [1.0, 2.5] {
        spec.objects.push(SceneObject {
            class: "drain".into(),
            position: spec.street_point(20.0, right),
            elevation: 0.0,
        });
    }
    spec
}
