/*
 * Copyright 2026 The PAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pan/model.hpp"

#include <json.hpp>

#include "pan/errors.hpp"
#include "pan/io.hpp"

namespace pan {

using json = nlohmann::json;

CsmConfig ModelBundle::csmConfig() const {
  CsmConfig c;
  c.m = csm.m();
  c.relevance_enabled = relevance_enabled;
  return c;
}

std::size_t ModelBundle::inputDim() const {
  if (encoder_params.empty()) return csm.d();
  return encoder_params.front().value.rows();
}

void ModelBundle::validate(std::size_t input_dim) const {
  encoder.validate();
  csm.validate();
  if (inputDim() != input_dim) {
    throw DimensionError("checkpoint expects input dimension " + std::to_string(inputDim()) +
                         " but features have dimension " + std::to_string(input_dim));
  }
  const std::size_t out = encoder.outputDim(input_dim);
  if (out != csm.d()) {
    throw DimensionError("encoder output dimension " + std::to_string(out) +
                         " does not match CSM d=" + std::to_string(csm.d()));
  }
}

Matrix ModelBundle::embed(const Matrix& features, const SimilarityGraph& context) const {
  return encode(encoder, encoder_params, features, &context, false, 0);
}

std::vector<CsmOutput> ModelBundle::forward(const Matrix& features, std::span<const ItemPair> pairs,
                                            const SimilarityGraph& context) const {
  const Matrix h = embed(features, context);
  if (h.cols() != csm.d()) {
    throw DimensionError("features encode to dimension " + std::to_string(h.cols()) +
                         " but the model expects d=" + std::to_string(csm.d()));
  }
  return csmBatchForward(pairs, h, csm, csmConfig());
}

ad::ParameterList ModelBundle::parameters() const {
  ad::ParameterList all = encoder_params;
  for (auto& p : csm.toList()) all.push_back(std::move(p));
  return all;
}

void ModelBundle::setParameters(const ad::ParameterList& params) {
  for (auto& p : encoder_params) {
    const Matrix& v = ad::findParameter(params, p.name);
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw DimensionError("parameter " + p.name + " changes shape");
    }
    p.value = v;
  }
  CsmParameters next = CsmParameters::fromList(params);
  if (next.w1.rows() != csm.w1.rows() || next.m() != csm.m()) {
    throw DimensionError("csm parameters change shape");
  }
  csm = std::move(next);
}

Matrix AttrSimilarityModel::predictAttributes(const Matrix& features,
                                              const SimilarityGraph& context) const {
  const Matrix h = encode(encoder, encoder_params, features, &context, false, 0);
  return sigmoid(addRowBroadcast(matmul(h, attr_w), attr_b));
}

namespace {

json encoderJson(const EncoderSpec& e) {
  return json{{"kind", toString(e.kind)},
              {"layer_dims", e.layer_dims},
              {"num_layers", e.num_layers},
              {"hidden_dim", e.hidden_dim},
              {"activation", toString(e.activation)},
              {"layer_dropout_p", e.layer_dropout_p},
              {"edge_dropout_p", e.edge_dropout_p}};
}

EncoderSpec encoderFromJson(const json& j) {
  EncoderSpec e;
  e.kind = parseEncoderKind(j.at("kind").get<std::string>());
  e.layer_dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  e.num_layers = j.at("num_layers").get<std::size_t>();
  e.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  e.activation = parseActivation(j.at("activation").get<std::string>());
  e.layer_dropout_p = j.at("layer_dropout_p").get<double>();
  e.edge_dropout_p = j.at("edge_dropout_p").get<double>();
  return e;
}

json matrixJson(const std::string& name, const Matrix& m) {
  std::vector<std::string> values;
  values.reserve(m.size());
  for (double v : m.values()) values.push_back(toHexFloat(v));
  return json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"values", values}};
}

ad::NamedParameter matrixFromJson(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto text = j.at("values").get<std::vector<std::string>>();
  if (text.size() != rows * cols) {
    throw ParseError("parameter " + j.at("name").get<std::string>() + " has " +
                     std::to_string(text.size()) + " values for shape " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  std::vector<double> values;
  values.reserve(text.size());
  for (const auto& t : text) values.push_back(fromHexFloat(t));
  return {j.at("name").get<std::string>(), Matrix(rows, cols, std::move(values))};
}

}  // namespace

std::string checkpointJson(const ModelBundle& model) {
  json j;
  j["format"] = "pan-checkpoint-1";
  j["encoder"] = encoderJson(model.encoder);
  j["relevance_enabled"] = model.relevance_enabled;
  json params = json::array();
  for (const auto& p : model.parameters()) params.push_back(matrixJson(p.name, p.value));
  j["parameters"] = params;
  return j.dump(1) + "\n";
}

ModelBundle parseCheckpoint(const std::string& text, const std::string& origin) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != "pan-checkpoint-1") {
      throw ParseError(origin + ": not a PAN checkpoint");
    }
    ModelBundle m;
    m.encoder = encoderFromJson(j.at("encoder"));
    m.relevance_enabled = j.at("relevance_enabled").get<bool>();
    ad::ParameterList all;
    for (const auto& p : j.at("parameters")) all.push_back(matrixFromJson(p));
    for (auto& p : all) {
      if (p.name.rfind("enc.", 0) == 0) m.encoder_params.push_back(p);
    }
    m.csm = CsmParameters::fromList(all);
    return m;
  } catch (const json::exception& e) {
    throw ParseError(origin + ": malformed checkpoint: " + e.what());
  }
}

void saveCheckpoint(const ModelBundle& model, const std::string& path) {
  writeTextFile(path, checkpointJson(model));
}

ModelBundle loadCheckpoint(const std::string& path) {
  return parseCheckpoint(readTextFile(path), path);
}

}  // namespace pan
