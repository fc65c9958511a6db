import math

from werkzeug.datastructures import MultiDict
from wtforms import Form, FloatField, IntegerField, SelectField, StringField
from wtforms.validators import NumberRange, Optional, ValidationError

from errors import ConfigError
from extensions import output_dir
from models import Constants, MapParams, RunConfig

ESCAPE_REGIONS = ('V1', 'V2', 'V3', 'V4', 'V5', 'V6')
SCAN_OBSERVABLES = ('gap', 'crossings', 'min_splitting_angle', 'lyapunov_min')


class FamilyForm(Form):
    a = FloatField('a', default=2.0, validators=[Optional()])
    b = FloatField('b', default=0.05, validators=[Optional()])
    eta_bound = FloatField('eta bound', default=0.0,
                           validators=[Optional(), NumberRange(min=0.0, message="eta_bound must be non-negative")])
    perturbation = SelectField('Perturbation', choices=[('zero', 'zero'), ('bump', 'bump')], default='zero')
    perturbation_epsilon = FloatField('Perturbation epsilon', default=0.01, validators=[Optional()])
    perturbation_scale = FloatField('Perturbation scale', default=1.0, validators=[Optional()])
    window_xmin = FloatField('window xmin', default=-2.0, validators=[Optional()])
    window_xmax = FloatField('window xmax', default=2.0, validators=[Optional()])
    window_ymin = FloatField('window ymin', default=-4.0, validators=[Optional()])
    window_ymax = FloatField('window ymax', default=2.0, validators=[Optional()])

    def validate_b(self, b):
        if b.data is not None and abs(b.data) >= 1.0:
            raise ValidationError('|b| must be below 1 for a dissipative family')

    def validate(self, extra_validators=None):
        if not super(FamilyForm, self).validate(extra_validators):
            return False

        if self.window_xmin.data >= self.window_xmax.data or self.window_ymin.data >= self.window_ymax.data:
            self.window_xmin.errors = ['Window bounds must satisfy xmin < xmax and ymin < ymax']
            return False

        if self.perturbation.data != 'zero' and self.eta_bound.data == 0.0:
            self.eta_bound.errors = ['A nonzero perturbation needs a declared eta_bound']
            return False

        return True

    def to_params(self):
        params = {}
        if self.perturbation.data == 'bump':
            params = {'epsilon': self.perturbation_epsilon.data, 'scale': self.perturbation_scale.data}
        return MapParams(a=self.a.data, b=self.b.data, eta_bound=self.eta_bound.data,
                         perturbation=self.perturbation.data, perturbation_params=params,
                         window=(self.window_xmin.data, self.window_xmax.data,
                                 self.window_ymin.data, self.window_ymax.data))


class ConstantsForm(Form):
    delta = FloatField('delta', default=0.1, validators=[Optional(), NumberRange(min=1e-6, max=0.5)])
    alpha = FloatField('alpha', default=0.5, validators=[Optional(), NumberRange(min=1e-6, max=1.0)])
    epsilon = FloatField('epsilon', default=0.15, validators=[Optional(), NumberRange(min=1e-6, max=1.0)])
    k0 = IntegerField('k0', default=3, validators=[Optional(), NumberRange(min=1, max=60)])
    lambda_hat = FloatField('lambda hat', default=0.55, validators=[Optional()])
    max_spacing = FloatField('max spacing', default=1e-3, validators=[Optional(), NumberRange(min=1e-7, max=1.0)])
    max_turn = FloatField('max turn', default=0.05, validators=[Optional(), NumberRange(min=1e-6, max=1.0)])
    blowup = FloatField('blowup', default=1e6, validators=[Optional(), NumberRange(min=10.0)])

    def validate_lambda_hat(self, lambda_hat):
        if lambda_hat.data is not None and not 0.0 < lambda_hat.data < math.log(2.0):
            raise ValidationError('lambda_hat must lie in (0, ln 2)')

    def to_constants(self):
        return Constants(**{name: self[name].data for name in
                            ('delta', 'alpha', 'epsilon', 'k0', 'lambda_hat', 'max_spacing', 'max_turn', 'blowup')})


class RunForm(Form):
    seed = IntegerField('seed', default=0, validators=[Optional(), NumberRange(min=0)])
    output_dir = StringField('output directory', validators=[Optional()])


class FixedPointsForm(Form):
    pass


class ManifoldForm(Form):
    kind = SelectField('kind', choices=[('unstable', 'unstable'), ('stable', 'stable')], default='unstable')
    point = SelectField('fixed point', choices=[('p', 'p'), ('q', 'q')], default='q')
    arclength = FloatField('arclength', default=8.0, validators=[Optional(), NumberRange(min=0.0)])
    generations = IntegerField('generations', default=3, validators=[Optional(), NumberRange(min=0, max=12)])


class AstarForm(Form):
    bracket_lo = FloatField('bracket low', default=1.8, validators=[Optional()])
    bracket_hi = FloatField('bracket high', default=2.3, validators=[Optional()])
    tol = FloatField('tolerance', default=1e-8, validators=[Optional(), NumberRange(min=1e-14, max=1e-1)])
    scan_points = IntegerField('scan points', default=64, validators=[Optional(), NumberRange(min=2)])

    def validate(self, extra_validators=None):
        if not super(AstarForm, self).validate(extra_validators):
            return False
        if self.bracket_lo.data >= self.bracket_hi.data:
            self.bracket_lo.errors = ['Bracket must satisfy low < high']
            return False
        return True


class EscapeCheckForm(Form):
    region = SelectField('region', choices=[(r, r) for r in ESCAPE_REGIONS], default='V1')
    grid = IntegerField('grid', default=100, validators=[Optional(), NumberRange(min=2, max=2000)])
    max_steps = IntegerField('max steps', default=40, validators=[Optional(), NumberRange(min=1)])


class CertifyConesForm(Form):
    samples = IntegerField('samples', default=10000, validators=[Optional(), NumberRange(min=1)])
    segments = IntegerField('segments', default=200, validators=[Optional(), NumberRange(min=1)])
    max_len = IntegerField('max segment length', default=60, validators=[Optional(), NumberRange(min=1)])
    c_eps_target = FloatField('C_eps target', default=0.1, validators=[Optional(), NumberRange(min=0.0, max=1.0)])


class CriticalPointsForm(Form):
    k_min = IntegerField('lowest order', default=2, validators=[Optional(), NumberRange(min=1)])
    k_max = IntegerField('highest order', default=8, validators=[Optional(), NumberRange(min=1, max=40)])
    curve_x0 = FloatField('curve centre x', default=0.0, validators=[Optional()])
    curve_y0 = FloatField('curve height y', default=0.0, validators=[Optional()])
    half_length = FloatField('curve half length', default=0.5, validators=[Optional(), NumberRange(min=1e-6)])

    def validate(self, extra_validators=None):
        if not super(CriticalPointsForm, self).validate(extra_validators):
            return False
        if self.k_min.data > self.k_max.data:
            self.k_min.errors = ['k_min must not exceed k_max']
            return False
        return True


class FoliationForm(Form):
    seed_x = FloatField('seed x', validators=[Optional()])
    seed_y = FloatField('seed y', default=-0.75, validators=[Optional()])
    k_max = IntegerField('highest order', default=6, validators=[Optional(), NumberRange(min=1, max=30)])
    arclength = FloatField('leaf arclength', default=0.1, validators=[Optional(), NumberRange(min=0.0)])


class LyapunovForm(Form):
    x = FloatField('x', validators=[Optional()])
    y = FloatField('y', validators=[Optional()])
    n = IntegerField('steps', default=1000, validators=[Optional(), NumberRange(min=1)])
    transient = IntegerField('transient', default=0, validators=[Optional(), NumberRange(min=0)])

    def validate(self, extra_validators=None):
        if not super(LyapunovForm, self).validate(extra_validators):
            return False
        if (self.x.data is None) != (self.y.data is None):
            self.x.errors = ['Give both x and y, or neither to use the fixed point q']
            return False
        return True


class PeriodicOrbitsForm(Form):
    max_period = IntegerField('max period', default=6, validators=[Optional(), NumberRange(min=1, max=14)])


class SplittingForm(Form):
    samples = IntegerField('samples', default=2000, validators=[Optional(), NumberRange(min=1)])
    k_split = IntegerField('split order', default=8, validators=[Optional(), NumberRange(min=1, max=40)])
    n_steps = IntegerField('orbit steps', default=20000, validators=[Optional(), NumberRange(min=1)])


class ScanForm(Form):
    a_min = FloatField('a min', default=1.8, validators=[Optional()])
    a_max = FloatField('a max', default=2.3, validators=[Optional()])
    points = IntegerField('points', default=11, validators=[Optional(), NumberRange(min=1, max=10000)])
    observables = StringField('observables', default='gap', validators=[Optional()])

    def validate_observables(self, observables):
        names = [n.strip() for n in (observables.data or 'gap').split(',') if n.strip()]
        unknown = sorted(set(names) - set(SCAN_OBSERVABLES))
        if unknown:
            raise ValidationError(f'Unknown observables {unknown}; known: {list(SCAN_OBSERVABLES)}')

    def validate(self, extra_validators=None):
        if not super(ScanForm, self).validate(extra_validators):
            return False
        if self.a_min.data > self.a_max.data:
            self.a_min.errors = ['a_min must not exceed a_max']
            return False
        return True


class OneDimForm(Form):
    max_period = IntegerField('max period', default=10, validators=[Optional(), NumberRange(min=1, max=14)])
    bump_scale = FloatField('bump scale', default=0.0, validators=[Optional()])
    bracket_lo = FloatField('bracket low', default=1.5, validators=[Optional()])
    bracket_hi = FloatField('bracket high', default=2.5, validators=[Optional()])
    tol = FloatField('tolerance', default=1e-12, validators=[Optional(), NumberRange(min=1e-15)])


OPTION_FORMS = {
    'fixed-points': FixedPointsForm,
    'manifold': ManifoldForm,
    'astar': AstarForm,
    'escape-check': EscapeCheckForm,
    'certify-cones': CertifyConesForm,
    'critical-points': CriticalPointsForm,
    'foliation': FoliationForm,
    'lyapunov': LyapunovForm,
    'periodic-orbits': PeriodicOrbitsForm,
    'splitting': SplittingForm,
    'scan': ScanForm,
    'onedim': OneDimForm,
}


def flatten_config(data):
    """Flatten the JSON config schema into the flat field names used by the forms."""
    flat = {}
    family = dict(data.get('family', {}))
    window = family.pop('window', None)
    if window is not None:
        for name, value in zip(('window_xmin', 'window_xmax', 'window_ymin', 'window_ymax'), window):
            flat[name] = value
    for name, value in family.pop('perturbation_params', {}).items():
        flat[f'perturbation_{name}'] = value
    flat.update(family)
    flat.update(data.get('constants', {}))
    options = dict(data.get('options', {}))
    bracket = options.pop('bracket', None)
    if bracket is not None:
        flat['bracket_lo'], flat['bracket_hi'] = bracket
    if isinstance(options.get('observables'), (list, tuple)):
        options['observables'] = ','.join(options['observables'])
    flat.update(options)
    for key in ('seed', 'output_dir'):
        if key in data:
            flat[key] = data[key]
    return flat


def _formdata(flat):
    return MultiDict({k: repr(v) if isinstance(v, float) else str(v) for k, v in flat.items() if v is not None})


def build_run_config(command, raw=None, overrides=None):
    """Validate a config mapping plus overrides into a RunConfig, raising ConfigError with form errors."""
    if command not in OPTION_FORMS:
        raise ConfigError(f"Unknown command '{command}'", known=sorted(OPTION_FORMS))
    flat = flatten_config(raw or {})
    flat.update({k: v for k, v in (overrides or {}).items() if v is not None})
    formdata = _formdata(flat)

    errors = {}
    family = FamilyForm(formdata)
    constants = ConstantsForm(formdata)
    run = RunForm(formdata)
    options = OPTION_FORMS[command](formdata)
    for form in (family, constants, run, options):
        if not form.validate():
            errors.update(form.errors)
    if errors:
        raise ConfigError('invalid configuration', errors=errors)

    return RunConfig(command=command, family=family.to_params(), constants=constants.to_constants(),
                     options=dict(options.data), seed=run.seed.data,
                     output_dir=run.output_dir.data or output_dir())
