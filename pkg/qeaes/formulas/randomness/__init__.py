"""Statistical tests on bit sequences (NIST SP 800-22 subset)"""

from .frequency import FrequencyFormulas
from .runs import RunsFormulas
from .cusum import CusumFormulas

NistFormulas = (
    FrequencyFormulas +
    RunsFormulas +
    CusumFormulas
)
