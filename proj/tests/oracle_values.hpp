#pragma once

// Frozen reference values produced by tests/oracles/generate.py (numpy,
// scipy, cvxpy). Regenerate only if a fixture definition changes.

namespace oracle {

inline constexpr double cartpole_step[] = {0.0002, 0.1003, 0.0437, 0.05510000000000001};
inline constexpr double cartpole_nominal[] = {1.0, 0.0, 0.048, 0.032};
inline constexpr double cartpole_K[] = {2.858374466409157, -57.2057092054638, -0.20346433835115674, -5.959000701804486};
inline constexpr double cartpole_P_diag[] = {2343.770779014974, 32669.339182166645, 60.7582917647725, 340.2488527927672};
inline constexpr double cartpole_rho = 0.994616790836417;
inline constexpr double tube_support_alpha = 0.04067602355142427;
inline constexpr double tightened_input = 18.317568495257397;
inline constexpr double tube_support_alpha_full = 4.067602355142427;
inline constexpr double ocp_V[] = {-2.9999999999999627, -2.999999999999969, -2.999999999999973, -2.9999999999999, -2.999999999995462, -2.77858130451483, -2.428265973723157, -2.116553781455104, -1.8400015345315948, -1.5953953569257944};
inline constexpr double ocp_objective = 472.7900075810993;
inline constexpr double cstr_C_eq = 3.599095185611841;
inline constexpr double cstr_Q_eq = 1412.7590277960167;
inline constexpr double cstr_Ad[] = {1.3574401559930962, 3.3028831925883533, -0.002194018373419612, 0.8672817873609437};
inline constexpr double cstr_Bd[] = {0.00012663449088548128, -1.1502663539655797e-07};
inline constexpr double cstr_K[] = {-4875.098600800414, -31330.08566125512};
inline constexpr double cstr_inflow_step[] = {344.2330851344888, 0.46934601103261897};
inline constexpr double lti_expm[] = {0.6936543801833048, -1.1988788298019888};

}  // namespace oracle
