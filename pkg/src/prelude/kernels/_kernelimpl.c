#include "_kernelimpl.h"

#include <math.h>

#define SCALAR float
#define SUF(name) name##_f32
#define EXPS expf
#define TANHS tanhf
#include "_kernelimpl_gen.h"
#undef SCALAR
#undef SUF
#undef EXPS
#undef TANHS

#define SCALAR double
#define SUF(name) name##_f64
#define EXPS exp
#define TANHS tanh
#include "_kernelimpl_gen.h"
#undef SCALAR
#undef SUF
#undef EXPS
#undef TANHS
