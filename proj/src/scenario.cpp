#include "endo/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace endo {

namespace {

// Strict view of one JSON object: every key must be consumed before finish().
class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(where("") + " must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const Json& raw(const char* key)
    {
        seen_.insert(key);
        return j_.at(key);
    }

    Section child(const char* key)
    {
        seen_.insert(key);
        return Section(j_.at(key), join(key));
    }

    template <class T>
    void get(const char* key, T& out)
    {
        if (!j_.contains(key))
            return;
        seen_.insert(key);
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    void get(const char* key, Vec3& out) { fixed(key, out.data(), 3); }
    void get(const char* key, Vec6& out) { fixed(key, out.data(), 6); }

    void get(const char* key, Pose6& out)
    {
        Vec6 v = out.vec();
        fixed(key, v.data(), 6);
        out = Pose6::from_vec(v);
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown key " + where(it.key().c_str()));
    }

    std::string join(const char* key) const
    {
        if (!*key)
            return path_;
        return path_.empty() ? std::string(key) : path_ + "." + key;
    }

    std::string where(const char* key) const
    {
        const std::string p = join(key);
        return "'" + (p.empty() ? std::string("<root>") : p) + "'";
    }

private:
    void fixed(const char* key, double* out, int n)
    {
        if (!j_.contains(key))
            return;
        seen_.insert(key);
        const Json& a = j_.at(key);
        if (!a.is_array() || static_cast<int>(a.size()) != n)
            throw ConfigError(where(key) + " must be an array of " + std::to_string(n) + " numbers");
        for (int i = 0; i < n; ++i) {
            if (!a[i].is_number())
                throw ConfigError(where(key) + " must contain numbers");
            out[i] = a[i].get<double>();
        }
    }

    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Json vec_json(const double* v, int n)
{
    Json a = Json::array();
    for (int i = 0; i < n; ++i)
        a.push_back(v[i]);
    return a;
}

Json to_j(const Vec3& v) { return vec_json(v.data(), 3); }
Json to_j(const Vec6& v) { return vec_json(v.data(), 6); }
Json to_j(const Pose6& p)
{
    const Vec6 v = p.vec();
    return vec_json(v.data(), 6);
}

void read_file(Section s, FileModel& f)
{
    if (s.has("preset")) {
        std::string name;
        s.get("preset", name);
        f = FileModel::preset(name);
    }
    s.get("length", f.length);
    s.get("youngs_modulus", f.youngs_modulus);
    s.get("effective_diameter", f.effective_diameter);
    s.get("max_apical_force", f.max_apical_force);
    s.get("max_axial_torque", f.max_axial_torque);
    s.finish();
}

void read_canal(Section s, CanalModel& c)
{
    if (s.has("straight_length")) {
        double len = 0;
        s.get("straight_length", len);
        c = CanalModel::straight(len);
    }
    if (s.has("g")) {
        std::vector<double> g;
        s.get("g", g);
        if (g.size() != 7)
            throw ConfigError("'canal.g' must hold 7 coefficients");
        std::copy(g.begin(), g.end(), c.g.begin());
    }
    if (s.has("h")) {
        std::vector<double> h;
        s.get("h", h);
        if (h.size() != 7)
            throw ConfigError("'canal.h' must hold 7 coefficients");
        std::copy(h.begin(), h.end(), c.h.begin());
    }
    s.get("entrance_radius", c.entrance_radius);
    s.get("apex_radius", c.apex_radius);
    s.get("length", c.length);
    s.get("wall_stiffness", c.wall_stiffness);
    s.get("wall_damping", c.wall_damping);
    s.get("cut_rate", c.cut_rate);
    s.finish();
}

void read_contact(Section s, ContactParams& c)
{
    s.get("sample_spacing", c.sample_spacing);
    s.get("file_tip_radius", c.file_tip_radius);
    s.get("file_taper", c.file_taper);
    s.get("entrance_ramp", c.entrance_ramp);
    s.get("engage_scale", c.engage_scale);
    s.get("axial_stiffness", c.axial_stiffness);
    s.get("axial_damping", c.axial_damping);
    s.get("axial_speed_gain", c.axial_speed_gain);
    s.get("torque_coefficient", c.torque_coefficient);
    s.get("wall_friction", c.wall_friction);
    s.get("flexible_file", c.flexible_file);
    s.finish();
}

void read_controller(Section s, ControllerParams& c)
{
    s.get("kp", c.kp);
    s.get("kd", c.kd);
    s.get("ma", c.ma);
    s.get("ba", c.ba);
    s.get("ka", c.ka);
    s.get("kf", c.kf);
    s.get("inner_period", c.inner_period);
    s.get("outer_period", c.outer_period);
    s.get("tustin_exact", c.tustin_exact);
    if (s.has("units")) {
        std::string u;
        s.get("units", u);
        c.units = admittance_units_from_string(u);
    }
    s.get("clamp_linear", c.clamp_linear);
    s.get("clamp_angular", c.clamp_angular);
    s.finish();
}

void read_trajectory(Section s, PatientTrajectory& t)
{
    if (s.has("kind")) {
        std::string k;
        s.get("kind", k);
        t.kind = trajectory_kind_from_string(k);
    }
    s.get("speed", t.speed);
    s.get("circle_radius", t.circle_radius);
    s.get("circle_depth", t.circle_depth);
    s.get("angle_amplitude", t.angle_amplitude);
    s.get("max_angular_rate", t.max_angular_rate);
    s.finish();
}

void read_fsm(Section s, FsmConfig& f)
{
    if (s.has("force_schedule")) {
        std::vector<double> v;
        s.get("force_schedule", v);
        if (v.size() != f.force_schedule.size())
            throw ConfigError("'fsm.force_schedule' must hold 4 values");
        std::copy(v.begin(), v.end(), f.force_schedule.begin());
    }
    s.get("contact_force", f.contact_force);
    s.get("torque_limit", f.torque_limit);
    s.get("step_up_time", f.step_up_time);
    s.get("reverse_time", f.reverse_time);
    s.get("disengage_force", f.disengage_force);
    s.get("clean_rpm", f.clean_rpm);
    s.get("reverse_rpm", f.reverse_rpm);
    if (s.has("previous_depth")) {
        const Json& v = s.raw("previous_depth");
        if (v.is_null())
            f.previous_depth = std::numeric_limits<double>::infinity();
        else if (v.is_number())
            f.previous_depth = v.get<double>();
        else
            throw ConfigError("'fsm.previous_depth' must be a number or null");
    }
    s.finish();
}

void read_episode(Section s, EpisodeConfig& e)
{
    if (s.has("dh")) {
        const Json& rows = s.raw("dh");
        if (!rows.is_array() || rows.size() != 6)
            throw ConfigError("'episode.dh' must hold 6 rows of [a, alpha, d, theta_offset]");
        for (std::size_t i = 0; i < 6; ++i) {
            const Json& r = rows[i];
            if (!r.is_array() || r.size() != 4)
                throw ConfigError("'episode.dh' rows must be [a, alpha, d, theta_offset]");
            for (const auto& v : r)
                if (!v.is_number())
                    throw ConfigError("'episode.dh' entries must be numbers");
            e.dh.rows[i] = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
        }
    }
    if (s.has("joint_limits")) {
        Section jl = s.child("joint_limits");
        jl.get("lower", e.joint_limits.lower);
        jl.get("upper", e.joint_limits.upper);
        jl.finish();
    }
    s.get("q0", e.q0);
    if (s.has("tool")) {
        Section t = s.child("tool");
        t.get("t_F", e.tool.t_F);
        t.get("working_part_length", e.tool.working_part_length);
        t.finish();
    }
    if (s.has("file"))
        read_file(s.child("file"), e.file);
    if (s.has("canal"))
        read_canal(s.child("canal"), e.canal);
    if (s.has("contact"))
        read_contact(s.child("contact"), e.contact);
    if (s.has("controller"))
        read_controller(s.child("controller"), e.controller);
    if (s.has("scheme")) {
        std::string v;
        s.get("scheme", v);
        e.scheme = scheme_from_string(v);
    }
    if (s.has("trajectory"))
        read_trajectory(s.child("trajectory"), e.trajectory);
    s.get("patient_offset", e.patient_offset);
    if (s.has("ptm_sensor")) {
        Section p = s.child("ptm_sensor");
        p.get("sigma", e.ptm_sensor.sigma);
        p.get("quantization", e.ptm_sensor.quantization);
        p.get("stroke_limit", e.ptm_sensor.stroke_limit);
        p.finish();
    }
    if (s.has("newton")) {
        Section n = s.child("newton");
        n.get("tol", e.newton.tol);
        n.get("max_iterations", e.newton.max_iterations);
        n.get("max_halvings", e.newton.max_halvings);
        n.get("fd_step", e.newton.fd_step);
        n.finish();
    }
    s.get("ptm_gate_translation", e.ptm_gate_translation);
    s.get("ptm_gate_rotation", e.ptm_gate_rotation);
    s.get("ptm_max_rejections", e.ptm_max_rejections);
    if (s.has("sensor_noise")) {
        Section n = s.child("sensor_noise");
        n.get("sigma_f", e.sensor_noise.sigma_f);
        n.get("sigma_tau", e.sensor_noise.sigma_tau);
        n.finish();
    }
    if (s.has("sensor_quantization")) {
        Section q = s.child("sensor_quantization");
        q.get("force_step", e.sensor_quant.force_step);
        q.get("torque_step", e.sensor_quant.torque_step);
        q.finish();
    }
    if (s.has("gravity")) {
        Section g = s.child("gravity");
        g.get("w_h", e.gravity.w_h);
        g.get("r_h", e.gravity.r_h);
        g.get("mount_yaw", e.gravity.mount_yaw);
        g.finish();
    }
    s.get("t_FS", e.t_FS);
    s.get("duration", e.duration);
    s.get("initial_depth", e.initial_depth);
    s.get("initial_frontier", e.initial_frontier);
    s.get("use_fsm", e.use_fsm);
    s.get("desired_fz", e.desired_fz);
    if (s.has("fsm"))
        read_fsm(s.child("fsm"), e.fsm);
    if (s.has("events")) {
        const Json& ev = s.raw("events");
        if (!ev.is_array())
            throw ConfigError("'episode.events' must be an array");
        e.events.clear();
        for (std::size_t i = 0; i < ev.size(); ++i) {
            Section es(ev[i], "episode.events[" + std::to_string(i) + "]");
            ScriptedEvent se;
            es.get("time", se.time);
            std::string name = "none";
            es.get("event", name);
            se.event = dentist_event_from_string(name);
            es.finish();
            e.events.push_back(se);
        }
    }
    if (s.has("apex_depth")) {
        const Json& v = s.raw("apex_depth");
        if (v.is_null())
            e.apex_depth.reset();
        else if (v.is_number())
            e.apex_depth = v.get<double>();
        else
            throw ConfigError("'episode.apex_depth' must be a number or null");
    }
    std::uint64_t seed = e.seed;
    s.get("seed", seed);
    e.seed = seed;
    s.finish();
}

void read_platform(Section s, PlatformConfig& p)
{
    if (s.has("controller"))
        read_controller(s.child("controller"), p.controller);
    if (s.has("file"))
        read_file(s.child("file"), p.file);
    s.get("insertion_depth", p.insertion_depth);
    s.get("platform_stiffness", p.platform_stiffness);
    if (s.has("motion")) {
        std::string m;
        s.get("motion", m);
        if (m == "ramp_hold")
            p.motion = PlatformMotion::ramp_hold;
        else if (m == "triangle")
            p.motion = PlatformMotion::triangle;
        else
            throw ConfigError("unknown platform motion '" + m + "'");
    }
    s.get("speed", p.speed);
    s.get("travel", p.travel);
    s.get("ramp_time", p.ramp_time);
    s.get("duration", p.duration);
    if (s.has("sensor_noise")) {
        Section n = s.child("sensor_noise");
        n.get("sigma_f", p.sensor_noise.sigma_f);
        n.get("sigma_tau", p.sensor_noise.sigma_tau);
        n.finish();
    }
    if (s.has("sensor_quantization")) {
        Section q = s.child("sensor_quantization");
        q.get("force_step", p.sensor_quant.force_step);
        q.get("torque_step", p.sensor_quant.torque_step);
        q.finish();
    }
    s.get("inner_period", p.inner_period);
    std::uint64_t seed = p.seed;
    s.get("seed", seed);
    p.seed = seed;
    s.finish();
}

Json controller_json(const ControllerParams& c)
{
    return Json{{"kp", to_j(c.kp)},
                {"kd", to_j(c.kd)},
                {"ma", to_j(c.ma)},
                {"ba", to_j(c.ba)},
                {"ka", to_j(c.ka)},
                {"kf", to_j(c.kf)},
                {"inner_period", c.inner_period},
                {"outer_period", c.outer_period},
                {"tustin_exact", c.tustin_exact},
                {"units", to_string(c.units)},
                {"clamp_linear", c.clamp_linear},
                {"clamp_angular", c.clamp_angular}};
}

Json file_json(const FileModel& f)
{
    return Json{{"length", f.length},
                {"youngs_modulus", f.youngs_modulus},
                {"effective_diameter", f.effective_diameter},
                {"max_apical_force", f.max_apical_force},
                {"max_axial_torque", f.max_axial_torque}};
}

}  // namespace

Scenario scenario_from_json(const Json& j)
{
    Scenario sc;
    Section root(j, "");
    if (root.has("episode"))
        read_episode(root.child("episode"), sc.episode);
    if (root.has("platform"))
        read_platform(root.child("platform"), sc.platform);
    if (root.has("align")) {
        Section a = root.child("align");
        a.get("speeds", sc.align_speeds);
        a.finish();
    }
    if (root.has("sweep")) {
        Section w = root.child("sweep");
        w.get("repetitions", sc.sweep_repetitions);
        w.finish();
    }
    root.finish();

    sc.episode.validate();
    sc.platform.file.validate();
    sc.platform.controller.validate();
    if (!(sc.platform.platform_stiffness > 0) || !(sc.platform.speed > 0) || !(sc.platform.duration > 0) ||
        !(sc.platform.inner_period > 0))
        throw ConfigError("platform stiffness, speed, duration and period must be positive");
    if (sc.align_speeds.empty())
        throw ConfigError("'align.speeds' must not be empty");
    for (double v : sc.align_speeds)
        if (!(v > 0))
            throw ConfigError("'align.speeds' must be positive");
    if (sc.sweep_repetitions < 1)
        throw ConfigError("'sweep.repetitions' must be at least 1");
    return sc;
}

Json scenario_to_json(const Scenario& s)
{
    const EpisodeConfig& e = s.episode;
    Json events = Json::array();
    for (const auto& ev : e.events)
        events.push_back(Json{{"time", ev.time}, {"event", to_string(ev.event)}});
    Json fsm{{"force_schedule", e.fsm.force_schedule},
             {"contact_force", e.fsm.contact_force},
             {"torque_limit", e.fsm.torque_limit},
             {"step_up_time", e.fsm.step_up_time},
             {"reverse_time", e.fsm.reverse_time},
             {"disengage_force", e.fsm.disengage_force},
             {"clean_rpm", e.fsm.clean_rpm},
             {"reverse_rpm", e.fsm.reverse_rpm},
             {"previous_depth", std::isfinite(e.fsm.previous_depth) ? Json(e.fsm.previous_depth) : Json(nullptr)}};
    Json dh = Json::array();
    for (const auto& r : e.dh.rows)
        dh.push_back(Json::array({r.a, r.alpha, r.d, r.theta_offset}));
    Json episode{
        {"dh", dh},
        {"joint_limits", {{"lower", to_j(e.joint_limits.lower)}, {"upper", to_j(e.joint_limits.upper)}}},
        {"q0", to_j(e.q0)},
        {"tool", {{"t_F", to_j(e.tool.t_F)}, {"working_part_length", e.tool.working_part_length}}},
        {"file", file_json(e.file)},
        {"canal",
         {{"g", e.canal.g},
          {"h", e.canal.h},
          {"entrance_radius", e.canal.entrance_radius},
          {"apex_radius", e.canal.apex_radius},
          {"length", e.canal.length},
          {"wall_stiffness", e.canal.wall_stiffness},
          {"wall_damping", e.canal.wall_damping},
          {"cut_rate", e.canal.cut_rate}}},
        {"contact",
         {{"sample_spacing", e.contact.sample_spacing},
          {"file_tip_radius", e.contact.file_tip_radius},
          {"file_taper", e.contact.file_taper},
          {"entrance_ramp", e.contact.entrance_ramp},
          {"engage_scale", e.contact.engage_scale},
          {"axial_stiffness", e.contact.axial_stiffness},
          {"axial_damping", e.contact.axial_damping},
          {"axial_speed_gain", e.contact.axial_speed_gain},
          {"torque_coefficient", e.contact.torque_coefficient},
          {"wall_friction", e.contact.wall_friction},
          {"flexible_file", e.contact.flexible_file}}},
        {"controller", controller_json(e.controller)},
        {"scheme", to_string(e.scheme)},
        {"trajectory",
         {{"kind", to_string(e.trajectory.kind)},
          {"speed", e.trajectory.speed},
          {"circle_radius", e.trajectory.circle_radius},
          {"circle_depth", e.trajectory.circle_depth},
          {"angle_amplitude", e.trajectory.angle_amplitude},
          {"max_angular_rate", e.trajectory.max_angular_rate}}},
        {"patient_offset", to_j(e.patient_offset)},
        {"ptm_sensor",
         {{"sigma", e.ptm_sensor.sigma},
          {"quantization", e.ptm_sensor.quantization},
          {"stroke_limit", e.ptm_sensor.stroke_limit}}},
        {"newton",
         {{"tol", e.newton.tol},
          {"max_iterations", e.newton.max_iterations},
          {"max_halvings", e.newton.max_halvings},
          {"fd_step", e.newton.fd_step}}},
        {"ptm_gate_translation", e.ptm_gate_translation},
        {"ptm_gate_rotation", e.ptm_gate_rotation},
        {"ptm_max_rejections", e.ptm_max_rejections},
        {"sensor_noise", {{"sigma_f", e.sensor_noise.sigma_f}, {"sigma_tau", e.sensor_noise.sigma_tau}}},
        {"sensor_quantization",
         {{"force_step", e.sensor_quant.force_step}, {"torque_step", e.sensor_quant.torque_step}}},
        {"gravity",
         {{"w_h", to_j(e.gravity.w_h)}, {"r_h", to_j(e.gravity.r_h)}, {"mount_yaw", e.gravity.mount_yaw}}},
        {"t_FS", to_j(e.t_FS)},
        {"duration", e.duration},
        {"initial_depth", e.initial_depth},
        {"initial_frontier", e.initial_frontier},
        {"use_fsm", e.use_fsm},
        {"desired_fz", e.desired_fz},
        {"fsm", fsm},
        {"events", events},
        {"apex_depth", e.apex_depth ? Json(*e.apex_depth) : Json(nullptr)},
        {"seed", e.seed}};

    const PlatformConfig& p = s.platform;
    Json platform{{"controller", controller_json(p.controller)},
                  {"file", file_json(p.file)},
                  {"insertion_depth", p.insertion_depth},
                  {"platform_stiffness", p.platform_stiffness},
                  {"motion", p.motion == PlatformMotion::ramp_hold ? "ramp_hold" : "triangle"},
                  {"speed", p.speed},
                  {"travel", p.travel},
                  {"ramp_time", p.ramp_time},
                  {"duration", p.duration},
                  {"sensor_noise", {{"sigma_f", p.sensor_noise.sigma_f}, {"sigma_tau", p.sensor_noise.sigma_tau}}},
                  {"sensor_quantization",
                   {{"force_step", p.sensor_quant.force_step}, {"torque_step", p.sensor_quant.torque_step}}},
                  {"inner_period", p.inner_period},
                  {"seed", p.seed}};

    return Json{{"episode", episode},
                {"platform", platform},
                {"align", {{"speeds", s.align_speeds}}},
                {"sweep", {{"repetitions", s.sweep_repetitions}}}};
}

Json load_scenario_json(const std::string& path)
{
    if (path.empty())
        return Json::object();
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scenario '" + path + "' is not valid JSON: " + e.what());
    }
}

void apply_override(Json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);

    Json value;
    try {
        value = Json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }

    Json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty())
            throw ConfigError("override key '" + key + "' has an empty component");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object())
            throw ConfigError("override key '" + key + "' descends into a non-object");
        node = &(*node)[parts[i]];
        if (node->is_null())
            *node = Json::object();
    }
    if (!node->is_object())
        throw ConfigError("override key '" + key + "' descends into a non-object");
    (*node)[parts.back()] = value;
}

std::string config_hash(const Json& j)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::vector<std::string> episode_csv_columns()
{
    return {"t",           "state",       "mode",        "desired_fz", "insertion_depth", "cut_frontier",
            "err_x",       "err_y",       "err_z",       "err_phi",    "err_psi",         "err_theta",
            "fx",          "fy",          "fz",          "tx",         "ty",              "tz",
            "fx_sensed",   "fy_sensed",   "fz_sensed",   "tx_sensed",  "ty_sensed",       "tz_sensed",
            "cmd_x",       "cmd_y",       "cmd_z",       "cmd_phi",    "cmd_psi",         "cmd_theta",
            "l1",          "l2",          "l3",          "l4",         "l5",              "l6",
            "fracture_risk", "emergency"};
}

void write_episode_csv(std::ostream& os, const EpisodeLog& log, const std::vector<std::string>& metadata)
{
    for (const auto& m : metadata)
        os << "# " << m << '\n';
    const auto cols = episode_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i)
        os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& s : log.samples) {
        os << fmt(s.t) << ',' << to_string(s.state) << ','
           << (s.mode == ControlMode::HybridPositionForce ? "hybrid" : "admittance") << ',' << fmt(s.desired_fz)
           << ',' << fmt(s.insertion_depth) << ',' << fmt(s.cut_frontier);
        for (int i = 0; i < 6; ++i)
            os << ',' << fmt(s.alignment_error(i));
        const Vec6 wt = s.wrench_true.vec(), ws = s.wrench_sensed.vec();
        for (int i = 0; i < 6; ++i)
            os << ',' << fmt(wt(i));
        for (int i = 0; i < 6; ++i)
            os << ',' << fmt(ws(i));
        for (int i = 0; i < 6; ++i)
            os << ',' << fmt(s.command(i));
        for (int i = 0; i < 6; ++i)
            os << ',' << fmt(s.strings(i));
        os << ',' << (s.fracture_risk ? 1 : 0) << ',' << to_string(s.emergency) << '\n';
    }
}

}  // namespace endo
