package lib;

import org.junit.Test;
import static org.junit.Assert.*;

public class CalcTest {
    @Test
    public void divideByZero() {
        Calc calc = new Calc();
        calc.divide(1, 0);
    }
}
